"""Exception types shared by the codec, registry, server and client.

Every error that can reach a remote peer carries a ``code`` naming the
``ERR:<CODE>`` status the server answers with.
"""

from __future__ import annotations


class GpcError(Exception):
    code = "TASK_FAILED"


# -- header / params ---------------------------------------------------------


class WireError(GpcError):
    code = "BAD_HEADER"


class FieldTooLong(WireError):
    def __init__(self, field: str, length: int, limit: int):
        super().__init__(f"{field} is {length} bytes, slot holds {limit}")
        self.field = field
        self.length = length
        self.limit = limit


class InvalidCharacter(WireError):
    def __init__(self, field: str, offset: int):
        super().__init__(f"invalid character in {field} at offset {offset}")
        self.field = field
        self.offset = offset


class BadMarker(WireError):
    def __init__(self, byte: int):
        super().__init__(f"data marker byte 0x{byte:02x} is neither '+' nor NUL")
        self.byte = byte


class MalformedPadding(WireError):
    def __init__(self, field: str):
        super().__init__(f"non-NUL byte after terminator in {field}")
        self.field = field


class DuplicateKey(WireError):
    def __init__(self, key: str):
        super().__init__(f"duplicate parameter {key!r}")
        self.key = key


class BadToken(WireError):
    def __init__(self, token: str):
        super().__init__(f"malformed parameter token {token!r}")
        self.token = token


class BadValue(WireError):
    def __init__(self, key: str, value: str, reason: str = "invalid value"):
        super().__init__(f"{key}={value!r}: {reason}")
        self.key = key
        self.value = value


class MissingParam(WireError):
    code = "MISSING_PARAM"

    def __init__(self, key: str):
        super().__init__(f"missing required parameter {key!r}")
        self.key = key


class PayloadTooLarge(WireError):
    code = "TOO_LARGE"

    def __init__(self, size: int, limit: int):
        super().__init__(f"payload of {size} bytes exceeds limit of {limit}")
        self.size = size
        self.limit = limit


# -- framing -----------------------------------------------------------------


class Truncated(GpcError):
    code = "PAYLOAD_MISMATCH"

    def __init__(self, got: int, want: int):
        super().__init__(f"stream ended after {got} of {want} bytes")
        self.got = got
        self.want = want


class PayloadMismatch(GpcError):
    code = "PAYLOAD_MISMATCH"


# -- registry / tasks --------------------------------------------------------


class UnknownTask(GpcError):
    code = "UNKNOWN_TASK"

    def __init__(self, flag: str):
        super().__init__(f"no task registered under {flag!r}")
        self.flag = flag


class DuplicateFlag(GpcError):
    def __init__(self, flag: str):
        super().__init__(f"task {flag!r} is already registered")
        self.flag = flag


class TaskFailed(GpcError):
    code = "TASK_FAILED"


class BadImage(TaskFailed):
    pass


class InsufficientPoints(TaskFailed):
    def __init__(self, n: int, order: int):
        super().__init__(f"{n} points cannot determine a degree-{order} polynomial")
        self.n = n
        self.order = order


class Singular(TaskFailed):
    def __init__(self, pivot_row: int):
        super().__init__(f"matrix is singular at pivot row {pivot_row}")
        self.pivot_row = pivot_row


class OrderTooHigh(TaskFailed):
    def __init__(self, order: int, limit: int):
        super().__init__(f"polynomial order {order} exceeds limit {limit}")
        self.order = order
        self.limit = limit


class BadData(TaskFailed):
    pass


# -- client side -------------------------------------------------------------


class ClientError(GpcError):
    pass


class ConnectFailed(ClientError):
    pass


class ServerError(ClientError):
    def __init__(self, code: str, msg: str, result=None):
        super().__init__(f"{code}: {msg}" if msg else code)
        self.code = code
        self.msg = msg
        self.result = result


class UnsafeName(ClientError):
    def __init__(self, name: str):
        super().__init__(f"refusing unsafe output name {name!r}")
        self.name = name


class SizeMismatch(ClientError):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"input holds {actual} bytes, parameters imply {expected}")
        self.expected = expected
        self.actual = actual


class BadFormat(ClientError):
    pass
