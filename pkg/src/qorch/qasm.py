"""OpenQASM 2.0 subset used as the circuit wire format between workers.

Only ``h``, ``rx``, ``rz``, ``cx`` and ``measure`` are accepted. OpenQASM 2.0
has no parameter variables, so a free angle is written as ``0.0`` and its
``scale*name`` expression travels in a trailing comment block::

    // PARAMS: gamma_1 beta_1
    // 3: 1.0*gamma_1
    // 5: 2.0*beta_1

Statement indices count gate statements from 0. Readers that do not know the
block simply see comments.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .domain import Gate, ParamRef, QuantumCircuit

HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'
SUPPORTED = {"h": "H", "rx": "RX", "rz": "RZ", "cx": "CX"}
_KIND_TO_NAME = {v: k for k, v in SUPPORTED.items()}


class QasmError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" at line {line}" if line is not None else ""
        if line is not None and column is not None:
            where += f", column {column}"
        super().__init__(f"{message}{where}")


def format_angle(x: float) -> str:
    if not math.isfinite(x):
        raise QasmError(f"angle {x!r} is not finite")
    text = format(x, ".17g")
    if not any(ch in text for ch in ".en"):
        text += ".0"
    return text


def emit(c: QuantumCircuit) -> str:
    lines = [HEADER.rstrip("\n"), f"qreg q[{c.num_qubits}];", f"creg c[{c.num_qubits}];"]
    sidecar = []
    for k, g in enumerate(c.gates):
        name = _KIND_TO_NAME.get(g.kind)
        if name is None:
            raise QasmError(f"unsupported gate kind {g.kind!r}")
        operands = ",".join(f"q[{q}]" for q in g.qubits)
        if g.angle is None:
            lines.append(f"{name} {operands};")
        elif isinstance(g.angle, ParamRef):
            lines.append(f"{name}(0.0) {operands};")
            sidecar.append(f"// {k}: {format_angle(g.angle.scale)}*{g.angle.name}")
        else:
            lines.append(f"{name}({format_angle(g.angle)}) {operands};")
    if c.final:
        lines.extend(f"measure q[{q}] -> c[{q}];" for q in range(c.num_qubits))
    if c.parameters:
        lines.append("// PARAMS: " + " ".join(c.parameters))
        lines.extend(sidecar)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[;,\[\]()])
    """,
    re.VERBOSE,
)

_PARAMS_HEAD = re.compile(r"//\s*PARAMS:(?P<names>.*)$")
_PARAMS_ENTRY = re.compile(
    r"//\s*(?P<idx>\d+)\s*:\s*(?P<scale>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)\s*\*\s*(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*$"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> tuple[list[_Tok], list[_Tok]]:
    tokens, comments = [], []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QasmError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = _Tok(kind, m.group(), line, pos - line_start + 1)
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "comment":
            comments.append(tok)
        elif kind != "ws":
            tokens.append(tok)
        pos = m.end()
    return tokens, comments


class _Parser:
    def __init__(self, tokens: list[_Tok]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> _Tok | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self, expected: str | None = None, kind: str | None = None) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Tok("eof", "", 1, 1)
            raise QasmError(f"unexpected end of input, expected {expected or kind}", last.line, last.col)
        if (expected is not None and tok.text != expected) or (kind is not None and tok.kind != kind):
            raise QasmError(f"expected {expected or kind}, found {tok.text!r}", tok.line, tok.col)
        self.i += 1
        return tok

    def qubit(self, reg: str, size: int | None) -> tuple[int, _Tok]:
        name = self.next(kind="ident")
        if name.text != reg:
            raise QasmError(f"unknown register {name.text!r}", name.line, name.col)
        self.next("[")
        idx = self.next(kind="number")
        if not idx.text.isdigit():
            raise QasmError(f"bad index {idx.text!r}", idx.line, idx.col)
        self.next("]")
        value = int(idx.text)
        if size is not None and value >= size:
            raise QasmError(f"qubit index {value} out of range", idx.line, idx.col)
        return value, name


def parse(text: str) -> QuantumCircuit:
    tokens, comments = _tokenize(text)
    p = _Parser(tokens)

    p.next("OPENQASM")
    version = p.next(kind="number")
    if version.text not in ("2.0", "2"):
        raise QasmError(f"unsupported version {version.text}", version.line, version.col)
    p.next(";")
    tok = p.peek()
    if tok is not None and tok.text == "include":
        p.next("include")
        p.next(kind="string")
        p.next(";")

    qreg_size = creg_size = None
    gates: list[Gate] = []
    gate_lines: list[int] = []
    measured: list[tuple[int, int]] = []
    while p.peek() is not None:
        tok = p.next(kind="ident")
        word = tok.text
        if word in ("qreg", "creg"):
            name = p.next(kind="ident")
            p.next("[")
            size = p.next(kind="number")
            p.next("]")
            p.next(";")
            if not size.text.isdigit() or int(size.text) < 1:
                raise QasmError(f"bad register size {size.text!r}", size.line, size.col)
            if word == "qreg":
                if qreg_size is not None or name.text != "q":
                    raise QasmError("expected a single qreg named q", name.line, name.col)
                qreg_size = int(size.text)
            else:
                if creg_size is not None or name.text != "c":
                    raise QasmError("expected a single creg named c", name.line, name.col)
                creg_size = int(size.text)
            continue
        if qreg_size is None:
            raise QasmError("statement before qreg declaration", tok.line, tok.col)
        if word == "measure":
            q, _ = p.qubit("q", qreg_size)
            p.next("->")
            c, _ = p.qubit("c", creg_size)
            p.next(";")
            measured.append((q, c))
            continue
        if measured:
            raise QasmError("gate after measure", tok.line, tok.col)
        kind = SUPPORTED.get(word)
        if kind is None:
            raise QasmError(f"unknown gate {word!r}", tok.line, tok.col)
        angle = None
        if kind in ("RX", "RZ"):
            p.next("(")
            num = p.next(kind="number")
            p.next(")")
            angle = float(num.text)
        operands = [p.qubit("q", qreg_size)[0]]
        if kind == "CX":
            p.next(",")
            second, reg_tok = p.qubit("q", qreg_size)
            if second == operands[0]:
                raise QasmError("cx operands must differ", reg_tok.line, reg_tok.col)
            operands.append(second)
        p.next(";")
        gates.append(Gate(kind, tuple(operands), angle))
        gate_lines.append(tok.line)

    if qreg_size is None:
        raise QasmError("missing qreg declaration")
    if creg_size is not None and creg_size != qreg_size:
        raise QasmError(f"register size mismatch: qreg {qreg_size}, creg {creg_size}")
    final = False
    if measured:
        if measured != [(q, q) for q in range(qreg_size)]:
            raise QasmError("measure statements must cover every qubit in order")
        final = True

    parameters: tuple[str, ...] = ()
    for com in comments:
        head = _PARAMS_HEAD.match(com.text)
        if head:
            parameters = tuple(head.group("names").split())
            continue
        entry = _PARAMS_ENTRY.match(com.text)
        if entry is None:
            continue
        idx = int(entry.group("idx"))
        if idx >= len(gates) or gates[idx].kind not in ("RX", "RZ"):
            raise QasmError(f"parameter entry refers to invalid statement {idx}", com.line, com.col)
        name = entry.group("name")
        if name not in parameters:
            raise QasmError(f"undeclared parameter {name!r}", com.line, com.col)
        g = gates[idx]
        gates[idx] = Gate(g.kind, g.qubits, ParamRef(name, float(entry.group("scale"))))

    return QuantumCircuit(qreg_size, tuple(gates), parameters, final)
