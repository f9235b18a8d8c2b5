/**
 * WebSocket wiring: one socket reader feeding the Session, steering
 * helpers that issue request ids, reconnect with backoff. No DSP here.
 */

import { RequestKind, ServerMsg, Session, STRUCTURAL_KEYS } from "./protocol.js";

export class ConsoleClient {
    readonly session = new Session();
    onChange: (() => void) | null = null;

    private ws: WebSocket | null = null;
    private reconnectAttempts = 0;
    private closed = false;

    constructor(private readonly url: string) {}

    connect(): void {
        this.closed = false;
        this.session.connection = "connecting";
        this.ws = new WebSocket(this.url);
        this.ws.onmessage = (event) => {
            this.session.handle(JSON.parse(event.data) as ServerMsg);
            this.onChange?.();
        };
        this.ws.onopen = () => {
            this.reconnectAttempts = 0;
        };
        this.ws.onclose = () => {
            this.session.connection = "closed";
            this.onChange?.();
            if (!this.closed) this.scheduleReconnect();
        };
        this.ws.onerror = () => {
            this.ws?.close();
        };
    }

    close(): void {
        this.closed = true;
        this.ws?.close();
    }

    private scheduleReconnect(): void {
        const delay = Math.min(500 * 2 ** this.reconnectAttempts, 15000);
        this.reconnectAttempts += 1;
        setTimeout(() => {
            if (!this.closed) this.connect();
        }, delay);
    }

    private send(kind: RequestKind, label: string, body: Record<string, unknown>): string | null {
        if (this.ws === null || this.ws.readyState !== WebSocket.OPEN) {
            this.session.lastError = "not connected";
            this.onChange?.();
            return null;
        }
        const requestId = this.session.issue(kind, label);
        this.ws.send(JSON.stringify({ type: kind, request_id: requestId, ...body }));
        this.onChange?.();
        return requestId;
    }

    setMode(mode: string): string | null {
        return this.send("set_mode", `mode=${mode}`, { mode });
    }

    setConfig(patch: Record<string, unknown>): string | null {
        for (const key of Object.keys(patch)) {
            if (STRUCTURAL_KEYS.has(key)) {
                // Blocked client-side: the server would refuse anyway.
                this.session.lastError = `${key}: restart required`;
                this.onChange?.();
                return null;
            }
        }
        const label = Object.entries(patch)
            .map(([k, v]) => `${k}=${v}`)
            .join(",");
        return this.send("set_config", label, { patch });
    }

    setScene(scene: Record<string, unknown>): string | null {
        return this.send("set_scene", "scene", { scene });
    }

    subscribe(channels: string[]): string | null {
        return this.send("subscribe", `subscribe ${channels.join("+")}`, { channels });
    }
}

/** Server address from the page query (?server=host:port), ws:// assumed. */
export function serverUrlFromLocation(loc: Location): string {
    const params = new URLSearchParams(loc.search);
    const server = params.get("server");
    if (server !== null && server !== "") {
        return `ws://${server}/ws`;
    }
    return `ws://${loc.host}/ws`;
}
