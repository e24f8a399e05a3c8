// WebSocket channel to the gateway console port.

import type { Role, ServerMessage } from './messages.js';

export interface Channel {
  send(doc: object): void;
  close(): void;
}

export function openChannel(
  url: string,
  role: Role,
  onMessage: (msg: ServerMessage, wallMs: number) => void,
  onClose: () => void,
): Channel {
  const socket = new WebSocket(url);
  socket.onopen = () => {
    socket.send(JSON.stringify({ type: 'hello', role, subscribe: true }));
  };
  socket.onmessage = (event) => {
    let doc: ServerMessage;
    try {
      doc = JSON.parse(event.data as string) as ServerMessage;
    } catch {
      return;
    }
    onMessage(doc, performance.now());
  };
  socket.onclose = onClose;
  socket.onerror = onClose;
  return {
    send(doc: object): void {
      if (socket.readyState === WebSocket.OPEN) {
        socket.send(JSON.stringify(doc));
      }
    },
    close(): void {
      socket.close();
    },
  };
}
