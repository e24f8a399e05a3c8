"""Student scripting client for blimpsim classroom drones.

    from blimpsdk import connect
    drone = connect("localhost", drone_id=0)
    drone.up(2)
    drone.forward(3)
    print(drone.height())
    drone.off()
"""

from .client import (
    AckTimeout,
    CommandRejected,
    ConflictError,
    DroneError,
    DroneHandle,
    UnreachableError,
    connect,
)

__version__ = "0.1.0"

__all__ = [
    "AckTimeout",
    "CommandRejected",
    "ConflictError",
    "DroneError",
    "DroneHandle",
    "UnreachableError",
    "connect",
    "__version__",
]
