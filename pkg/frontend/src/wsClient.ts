/** Connection handling: handshake, typed dispatch, reconnect-with-fresh-
 * hello. The WebSocket constructor is injected so tests can use `ws`. */

import {
  isEvent, isFrame, makeMessage, parseServerMessage,
  type FramePayload, type ReportPayload, type ScenePayload, type WireMessage,
} from './protocol.js';

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientHandlers {
  onHello?(payload: Record<string, unknown>): void;
  onScene?(scene: ScenePayload): void;
  onFrame?(frame: FramePayload): void;
  onEvent?(kind: string, payload: Record<string, unknown>, t: number): void;
  onReport?(report: ReportPayload): void;
  onError?(code: string, detail: string): void;
  onClose?(): void;
}

export class PalpClient {
  private socket: SocketLike | null = null;
  private handlers: ClientHandlers;
  private url: string;
  private factory: SocketFactory;
  sessionTimeMs = 0;

  constructor(url: string, handlers: ClientHandlers, factory?: SocketFactory) {
    this.url = url;
    this.handlers = handlers;
    this.factory = factory
      ?? ((u: string) => new WebSocket(u) as unknown as SocketLike);
  }

  /** Opens the socket; every (re)connect starts with a fresh hello. */
  connect(): void {
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      socket.send(JSON.stringify(makeMessage('hello', 0, {})));
    };
    socket.onmessage = (ev) => this.dispatch(String(ev.data));
    socket.onclose = () => {
      this.socket = null;
      this.handlers.onClose?.();
    };
    socket.onerror = () => undefined;
  }

  get connected(): boolean {
    return this.socket !== null;
  }

  private dispatch(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) return;
    this.sessionTimeMs = Math.max(this.sessionTimeMs, msg.t);
    if (isFrame(msg)) {
      this.handlers.onFrame?.(msg.payload as unknown as FramePayload);
    } else if (msg.type === 'hello') {
      this.handlers.onHello?.(msg.payload);
    } else if (isEvent(msg, 'scene')) {
      this.handlers.onScene?.(msg.payload as unknown as ScenePayload);
    } else if (msg.type === 'event') {
      this.handlers.onEvent?.(String(msg.payload.kind), msg.payload, msg.t);
    } else if (msg.type === 'report') {
      this.handlers.onReport?.(msg.payload as unknown as ReportPayload);
    } else if (msg.type === 'error') {
      this.handlers.onError?.(String(msg.payload.code ?? 'unknown'),
                              String(msg.payload.detail ?? ''));
    }
  }

  send(msg: WireMessage): boolean {
    if (this.socket === null) return false;
    this.socket.send(JSON.stringify(msg));
    return true;
  }

  start(scenario: string, seed: number,
        overrides?: Record<string, number>): void {
    const payload: Record<string, unknown> = { scenario, seed };
    if (overrides) payload.overrides = overrides;
    this.send(makeMessage('start', 0, payload));
  }

  sendAnswer(item: string, choice: number): void {
    this.send(makeMessage('answer', this.sessionTimeMs, { item, choice }));
  }

  close(): void {
    this.socket?.close();
  }
}
