"""Line-level execution tracer.

Reads one JSON job from stdin:

    {"mode": "entry"|"stdin", "source": str, "entry_name": str, "args": str,
     "stdin": str, "limits": {"max_events": int, "max_bytes": int}}

and writes one compact JSON event per line to stdout, followed by a summary
line. Empty deltas are omitted.
Each event's deltas describe what changed while that event's line ran.
"""

import ast
import io
import json
import os
import sys
import types

TARGET = "<target>"
REPR_LIMIT = 200
HIDDEN_TYPES = (types.ModuleType, types.FunctionType, types.BuiltinFunctionType, type)


class Abort(BaseException):
    pass


class Capture(io.TextIOBase):
    def __init__(self):
        self.pending = []
        self.done = []

    def writable(self):
        return True

    def write(self, s):
        self.pending.append(s)
        return len(s)

    def take(self):
        chunk = "".join(self.pending)
        self.pending = []
        self.done.append(chunk)
        return chunk

    def getvalue(self):
        return "".join(self.done) + "".join(self.pending)


def render(value):
    try:
        text = repr(value)
    except Exception as exc:  # noqa: BLE001
        text = "<unrepresentable %s: %s>" % (type(value).__name__, exc)
    text = text.replace("\r", "\\r").replace("\n", "\\n")
    if len(text) > REPR_LIMIT:
        extra = len(text) - REPR_LIMIT
        text = text[:REPR_LIMIT] + "\u2026(+%d chars)" % extra
        try:
            text += " [len=%d]" % len(value)
        except Exception:  # noqa: BLE001
            pass
    return text


def visible(name, value):
    return not name.startswith("__") and not isinstance(value, HIDDEN_TYPES)


class Tracer:
    def __init__(self, chan, capture, module_globals, limits):
        self.chan = chan
        self.capture = capture
        self.module_globals = module_globals
        self.max_events = int(limits.get("max_events", 10000))
        self.max_bytes = int(limits.get("max_bytes", 1048576))
        self.step = 0
        self.count = 0
        self.bytes = 0
        self.pending = None
        self.frame_snaps = {}
        self.global_snap = self.render_globals()
        self.outcome = None
        self.failure = None

    def render_globals(self):
        return {k: render(v) for k, v in list(self.module_globals.items()) if visible(k, v)}

    def render_locals(self, frame):
        if frame.f_locals is frame.f_globals:
            return {}
        return {k: render(v) for k, v in list(frame.f_locals.items()) if visible(k, v)}

    def flush(self):
        event, frame = self.pending
        self.pending = None
        key = id(frame)
        current = self.render_locals(frame)
        previous = self.frame_snaps.get(key, {})
        delta = {k: v for k, v in current.items() if previous.get(k) != v}
        if delta:
            event["locals_delta"] = delta
        if event["event_kind"] == "return":
            self.frame_snaps.pop(key, None)
        else:
            self.frame_snaps[key] = current
        globs = self.render_globals()
        delta = {k: v for k, v in globs.items() if self.global_snap.get(k) != v}
        if delta:
            event["globals_delta"] = delta
        self.global_snap = globs
        out = self.capture.take()
        if out:
            event["stdout_delta"] = out
        self.emit(event)

    def emit(self, event):
        line = json.dumps(event, ensure_ascii=False, separators=(",", ":"))
        self.chan.write(line + "\n")
        self.count += 1
        self.bytes += len(line.encode("utf-8")) + 1
        if self.count > self.max_events:
            self.outcome = {"status": "too_long"}
            raise Abort()
        if self.bytes > self.max_bytes:
            self.outcome = {"status": "too_large"}
            raise Abort()

    def record(self, frame, event):
        if event not in ("call", "line", "return", "exception"):
            return
        try:
            if self.pending is not None:
                self.flush()
            self.pending = (
                {"step": self.step, "event_kind": event, "line_no": frame.f_lineno},
                frame,
            )
            self.step += 1
        except Abort:
            raise
        except Exception as exc:  # noqa: BLE001
            self.failure = "%s: %s" % (type(exc).__name__, exc)
            sys.settrace(None)

    def global_hook(self, frame, event, arg):
        if frame.f_code.co_filename != TARGET or self.failure:
            return None
        self.record(frame, event)
        return self.local_hook

    def local_hook(self, frame, event, arg):
        if self.failure:
            return None
        self.record(frame, event)
        return self.local_hook

    def finish(self):
        if self.pending is not None and self.outcome is None and self.failure is None:
            try:
                self.flush()
            except Abort:
                pass


def main():
    job = json.loads(sys.stdin.read())
    chan = io.open(os.dup(1), "w", encoding="utf-8")
    capture = Capture()
    mode = job.get("mode", "entry")
    limits = job.get("limits", {})
    namespace = {"__name__": "__main__" if mode == "stdin" else "__target__", "__builtins__": __builtins__}

    real_stdout = sys.stdout
    sys.stdout = capture
    sys.stdin = io.StringIO(job.get("stdin") or "")
    outcome = {"status": "ok"}
    return_literal = None
    tracer = None
    try:
        code = compile(job["source"], TARGET, "exec")
        if mode == "entry":
            exec(code, namespace)
            args = ast.literal_eval(job.get("args") or "()")
            if not isinstance(args, tuple):
                args = (args,)
            entry = namespace[job["entry_name"]]
            tracer = Tracer(chan, capture, namespace, limits)
            sys.settrace(tracer.global_hook)
            try:
                result = entry(*args)
            finally:
                sys.settrace(None)
            return_literal = repr(result)
        else:
            tracer = Tracer(chan, capture, namespace, limits)
            sys.settrace(tracer.global_hook)
            try:
                exec(code, namespace)
            finally:
                sys.settrace(None)
    except Abort:
        pass
    except SystemExit as exc:
        if exc.code not in (None, 0):
            outcome = {"status": "runtime_error", "kind": "SystemExit", "message": str(exc.code)}
    except BaseException as exc:  # noqa: BLE001
        outcome = {"status": "runtime_error", "kind": type(exc).__name__, "message": str(exc)}
    finally:
        sys.settrace(None)
        sys.stdout = real_stdout

    if tracer is not None:
        tracer.finish()
        if tracer.outcome is not None:
            outcome = tracer.outcome
            return_literal = None
        elif tracer.failure is not None:
            outcome = {"status": "runtime_error", "kind": "TracerError", "message": tracer.failure}
            return_literal = None
    if outcome["status"] != "ok":
        return_literal = None

    summary = {
        "return_value_literal": return_literal,
        "stdout": "".join(capture.done) if tracer and tracer.count else capture.getvalue(),
        "outcome": outcome,
        "event_count": tracer.count if tracer else 0,
        "serialized_bytes": tracer.bytes if tracer else 0,
    }
    chan.write(json.dumps(summary, ensure_ascii=False) + "\n")
    chan.flush()


if __name__ == "__main__":
    main()
