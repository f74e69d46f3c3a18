"""Value Change Dump export for kernel traces (two-state, 1 ps timescale)."""

import io


def _identifier(index: int) -> str:
    # printable ASCII '!'..'~', little-endian base 94
    chars = []
    index += 1
    while index > 0:
        index -= 1
        chars.append(chr(33 + index % 94))
        index //= 94
    return "".join(chars)


def dumps(kernel) -> str:
    """Render the kernel's recorded trace as VCD text.

    Scopes appear in order of first registration, identifiers are handed out
    in signal-registration order. No date or version header is emitted so the
    output is byte-stable across runs.
    """
    ids = {sid: _identifier(i) for i, sid in enumerate(kernel.signals)}
    by_scope: dict[str, list] = {}
    for sig in kernel.signals.values():
        by_scope.setdefault(sig.scope, []).append(sig)

    out = io.StringIO()
    out.write("$timescale 1ps $end\n")
    for scope, sigs in by_scope.items():
        out.write(f"$scope module {scope} $end\n")
        for sig in sigs:
            out.write(f"$var wire 1 {ids[sig.id]} {sig.name} $end\n")
        out.write("$upscope $end\n")
    out.write("$enddefinitions $end\n")

    out.write("#0\n$dumpvars\n")
    for sig in kernel.signals.values():
        out.write(f"{sig.init}{ids[sig.id]}\n")
    out.write("$end\n")

    last_t = 0
    for t, sid, v in kernel.trace:
        if t != last_t:
            out.write(f"#{t}\n")
            last_t = t
        out.write(f"{v}{ids[sid]}\n")
    return out.getvalue()


def write(kernel, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps(kernel))


def parse(text: str) -> dict:
    """Minimal reader for the subset written by :func:`dumps`.

    Returns ``{"timescale": str, "signals": {"scope.name": [(t, v), ...]}}``.
    """
    tokens = text.split()
    pos = 0
    scope: list[str] = []
    names: dict[str, str] = {}
    changes: dict[str, list] = {}
    timescale = ""

    def take():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        return tok

    while pos < len(tokens):
        tok = take()
        if tok == "$timescale":
            timescale = take()
            if take() != "$end":
                raise ValueError("malformed $timescale")
        elif tok == "$scope":
            take()
            scope.append(take())
            take()
        elif tok == "$upscope":
            scope.pop()
            take()
        elif tok == "$var":
            take()
            width = take()
            if width != "1":
                raise ValueError(f"unsupported width {width}")
            ident = take()
            name = take()
            take()
            full = ".".join(scope + [name])
            names[ident] = full
            changes[full] = []
        elif tok == "$enddefinitions":
            take()
            break
    t = 0
    while pos < len(tokens):
        tok = take()
        if tok.startswith("#"):
            new_t = int(tok[1:])
            if new_t < t:
                raise ValueError("timestamps must be non-decreasing")
            t = new_t
        elif tok in ("$dumpvars", "$end"):
            continue
        elif tok[0] in "01":
            ident = tok[1:]
            if ident not in names:
                raise ValueError(f"undeclared identifier {ident!r}")
            changes[names[ident]].append((t, int(tok[0])))
        else:
            raise ValueError(f"unexpected token {tok!r}")
    return {"timescale": timescale, "signals": changes}
