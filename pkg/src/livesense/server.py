"""WebSocket streaming API serving the operator console.

JSON text messages. Server -> client: hello, rdm, targets, tracks, vitals,
stats, csi_stats, ack, error. Client -> server: set_config (patch),
set_mode, set_scene (simulator source only), subscribe. Each subscriber
gets its own bounded queue; a subscriber that cannot keep up is
disconnected so it can never stall processing.
"""

from __future__ import annotations

import asyncio
import contextlib

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .config import ConfigError
from .service import ALL_CHANNELS, PipelineService, SUBSCRIBER_QUEUE_LIMIT
from .simulator import scene_from_dict


def create_app(service: PipelineService, manage_service: bool = True) -> FastAPI:
    @contextlib.asynccontextmanager
    async def lifespan(_app: FastAPI):
        if manage_service:
            service.start()
        yield
        if manage_service:
            service.stop()

    app = FastAPI(title="livesense", lifespan=lifespan)
    app.state.service = service

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue(maxsize=SUBSCRIBER_QUEUE_LIMIT)

        def deliver(message: dict) -> None:
            # Called from the processing thread. Overflow means the client
            # is too slow: poison the queue so the sender closes it.
            def _put() -> None:
                try:
                    queue.put_nowait(message)
                except asyncio.QueueFull:
                    with contextlib.suppress(asyncio.QueueFull):
                        while not queue.empty():
                            queue.get_nowait()
                        queue.put_nowait({"type": "error", "message": "subscriber too slow"})
                        queue.put_nowait(None)

            loop.call_soon_threadsafe(_put)

        subscriber = service.broadcaster.register(deliver)
        await websocket.send_json(service.hello_message())

        async def sender() -> None:
            while True:
                message = await queue.get()
                if message is None:
                    await websocket.close()
                    return
                await websocket.send_json(message)

        async def receiver() -> None:
            while True:
                request = await websocket.receive_json()
                response = handle_request(service, subscriber, request)
                await websocket.send_json(response)

        send_task = asyncio.create_task(sender())
        recv_task = asyncio.create_task(receiver())
        try:
            done, pending = await asyncio.wait(
                {send_task, recv_task}, return_when=asyncio.FIRST_COMPLETED
            )
            for task in pending:
                task.cancel()
                with contextlib.suppress(asyncio.CancelledError, Exception):
                    await task
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, WebSocketDisconnect):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            service.broadcaster.unregister(subscriber)

    return app


def handle_request(service: PipelineService, subscriber, request: dict) -> dict:
    """Process one client request, returning the ack/error reply."""
    request_id = request.get("request_id")
    kind = request.get("type")

    def error(message: str) -> dict:
        return {"type": "error", "request_id": request_id, "message": message}

    try:
        if kind == "set_config":
            patch = request.get("patch")
            if not isinstance(patch, dict):
                return error("set_config requires a patch object")
            config_id = service.apply_patch(patch)
            return {"type": "ack", "request_id": request_id, "config_id": config_id}
        if kind == "set_mode":
            mode = request.get("mode")
            config_id = service.set_mode(mode)
            return {"type": "ack", "request_id": request_id, "config_id": config_id}
        if kind == "set_scene":
            scene_data = request.get("scene")
            if not isinstance(scene_data, dict):
                return error("set_scene requires a scene object")
            service.set_scene(scene_from_dict(scene_data))
            return {"type": "ack", "request_id": request_id}
        if kind == "subscribe":
            channels = request.get("channels")
            if not isinstance(channels, list):
                return error("subscribe requires a channels list")
            unknown = [c for c in channels if c not in ALL_CHANNELS]
            if unknown:
                return error(f"unknown channels: {unknown}")
            subscriber.channels = set(channels)
            return {"type": "ack", "request_id": request_id, "channels": sorted(subscriber.channels)}
        return error(f"unknown request type {kind!r}")
    except (ConfigError, ValueError) as exc:
        return error(str(exc))
