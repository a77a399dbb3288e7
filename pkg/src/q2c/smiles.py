"""SMILES tokenizer, rule-based atom perception and the binary-encoded-SMILES grid.

Every character of the input string becomes one 57-bit row of a 400-row grid.

Bit layout (frozen; checkpoints and golden files depend on it)::

    0-13   symbol one-hots   ( ) [ ] space : = # \\ / @ + - .
    14-19  digit one-hot for the digits 2..7
    20     ring bond opens     21  ring bond closes
    22-26  atom type           C H O N other
    27-30  total hydrogens     0 1 2 3 (more than 3 clamps to 3)
    31-33  formal charge       -1 0 +1 (clamped)
    34-39  valence             1 2 3 4 5 other
    40     ring atom
    41-45  degree              1 2 3 4 other (0 counts as other)
    46     aromatic
    47-49  chirality           R-class (@@) S-class (@) other (@TH1, @SP1, ...)
    50-56  hybridization       sp sp2 sp3 sp3d sp3d2 unspecified other

Atom-feature bits are set only on characters that spell an element symbol.
The "space" bit is reserved and never set.  Inside brackets, the hydrogen
count letter sets the H atom-type bit only, and digits (isotope, H count,
charge, atom class) set just their 2..7 one-hot.
"""
from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass
from typing import Literal, Optional

import networkx as nx
import numpy as np

N_ROWS = 400
N_COLS = 57

SYMBOL_BITS = {"(": 0, ")": 1, "[": 2, "]": 3, " ": 4, ":": 5, "=": 6, "#": 7,
               "\\": 8, "/": 9, "@": 10, "+": 11, "-": 12, ".": 13}
DIGIT_BASE = 14          # digits 2..7 -> 14..19
RING_BEGIN = 20
RING_END = 21
ATOM_TYPE_BASE = 22      # C H O N other
HCOUNT_BASE = 27
CHARGE_BASE = 31
VALENCE_BASE = 34
RING_ATOM = 40
DEGREE_BASE = 41
AROMATIC = 46
CHIRALITY_BASE = 47
HYBRID_BASE = 50

HYBRIDIZATIONS = ("sp", "sp2", "sp3", "sp3d", "sp3d2", "unspecified", "other")
ATOM_TYPES = ("C", "H", "O", "N")

ELEMENTS = (
    "H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co Ni Cu "
    "Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te I Xe Cs Ba "
    "La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir Pt Au Hg Tl Pb Bi "
    "Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No Lr"
).split()
ORGANIC = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
AROMATIC_BRACKET = ("se", "as", "te", "b", "c", "n", "o", "p", "s")
BOND_ORDERS = {"-": 1.0, "=": 2.0, "#": 3.0, "$": 4.0, ":": 1.5, "/": 1.0, "\\": 1.0}

# Valence-electron count of elements whose allowed valences we enforce.
_VALENCE_ELECTRONS = {"H": 1, "B": 3, "C": 4, "N": 5, "O": 6, "F": 7,
                      "Si": 4, "P": 5, "S": 6, "Cl": 7,
                      "As": 5, "Se": 6, "Br": 7, "Te": 6, "I": 7}
_PERIOD2 = {"H", "B", "C", "N", "O", "F"}

_element_alt = "|".join(sorted(ELEMENTS, key=len, reverse=True))
_aromatic_alt = "|".join(AROMATIC_BRACKET)
BRACKET_RE = re.compile(
    r"\[(?P<isotope>\d+)?"
    rf"(?P<element>{_element_alt}|{_aromatic_alt})"
    r"(?P<chiral>@(?:@|TH[12]|AL[12]|SP[123]|TB\d{1,2}|OH\d{1,2})?)?"
    r"(?P<hcount>H\d?)?"
    r"(?P<charge>\++\d*|-+\d*)?"
    r"(?P<aclass>:\d+)?\]"
)


class Rejected(ValueError):
    """A molecule the encoder refuses; ``reason`` is a stable machine-readable code."""

    reason = "rejected"


class ParseError(Rejected):
    reason = "parse_error"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class InvalidValence(Rejected):
    reason = "invalid_valence"


class DeuteriumRejected(Rejected):
    reason = "deuterium"


class TooLong(Rejected):
    reason = "too_long"


TokenKind = Literal["atom", "bracket_atom", "bond_symbol", "branch_open",
                    "branch_close", "ring_digit", "dot", "other_symbol"]


@dataclass(frozen=True)
class SmilesToken:
    kind: TokenKind
    text: str
    position: int
    ring: Optional[Literal["begin", "end"]] = None


@dataclass(frozen=True)
class AtomPerception:
    element: str
    aromatic: bool
    formal_charge: int
    explicit_h: int
    total_h: int
    degree: int
    valence: int
    in_ring: bool
    chirality: Optional[Literal["R", "S", "other"]]
    hybridization: str


@dataclass(frozen=True)
class BesGrid:
    bits: np.ndarray
    length: int


def tokenize(smiles: str) -> list[SmilesToken]:
    if not smiles:
        raise ParseError("empty SMILES", 0)
    tokens: list[SmilesToken] = []
    open_rings: dict[str, int] = {}   # label -> position of the opening digit
    branches: list[int] = []           # positions of unclosed '('
    i = 0
    while i < len(smiles):
        ch = smiles[i]
        if ch == "[":
            close = smiles.find("]", i)
            if close < 0:
                raise ParseError("unclosed bracket", i)
            tokens.append(SmilesToken("bracket_atom", smiles[i:close + 1], i))
            i = close + 1
            continue
        if ch == "]":
            raise ParseError("unmatched ']'", i)
        two = smiles[i:i + 2]
        if two in ("Cl", "Br"):
            tokens.append(SmilesToken("atom", two, i))
            i += 2
            continue
        if ch in ORGANIC or ch in AROMATIC_ORGANIC:
            tokens.append(SmilesToken("atom", ch, i))
        elif ch in BOND_ORDERS:
            tokens.append(SmilesToken("bond_symbol", ch, i))
        elif ch == "(":
            branches.append(i)
            tokens.append(SmilesToken("branch_open", ch, i))
        elif ch == ")":
            if not branches:
                raise ParseError("unmatched ')'", i)
            branches.pop()
            tokens.append(SmilesToken("branch_close", ch, i))
        elif ch == ".":
            tokens.append(SmilesToken("dot", ch, i))
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                label = smiles[i + 1:i + 3]
                if len(label) != 2 or not label.isdigit():
                    raise ParseError("'%' must be followed by two digits", i)
                text = "%" + label
            else:
                label = text = ch
            state = "end" if label in open_rings else "begin"
            if state == "end":
                del open_rings[label]
            else:
                open_rings[label] = i
            tokens.append(SmilesToken("ring_digit", text, i, state))
            i += len(text)
            continue
        else:
            raise ParseError(f"unexpected character {ch!r}", i)
        i += 1
    if branches:
        raise ParseError("unclosed '('", branches[-1])
    if open_rings:
        label, pos = min(open_rings.items(), key=lambda kv: kv[1])
        raise ParseError(f"unclosed ring bond {label}", pos)
    return tokens


@dataclass
class _Atom:
    element: str
    aromatic: bool
    bracket: bool
    charge: int = 0
    hcount: int = 0
    isotope: Optional[int] = None
    chiral: Optional[str] = None
    token: int = -1


def _parse_bracket(tok: SmilesToken) -> tuple[_Atom, re.Match]:
    m = BRACKET_RE.fullmatch(tok.text)
    if m is None:
        raise ParseError(f"malformed bracket atom {tok.text!r}", tok.position)
    sym = m["element"]
    aromatic = sym.islower()
    element = sym.capitalize() if aromatic else sym
    charge = 0
    if m["charge"]:
        c = m["charge"]
        sign = 1 if c[0] == "+" else -1
        digits = c.lstrip("+-")
        charge = sign * (int(digits) if digits else len(c))
    h = m["hcount"]
    hcount = 0 if not h else (int(h[1:]) if len(h) > 1 else 1)
    isotope = int(m["isotope"]) if m["isotope"] else None
    if element == "H" and isotope == 2:
        raise DeuteriumRejected(f"deuterium isotope in {tok.text!r}")
    return _Atom(element, aromatic, True, charge, hcount, isotope, m["chiral"]), m


def _allowed_valences(element: str, charge: int) -> Optional[tuple[int, ...]]:
    ve = _VALENCE_ELECTRONS.get(element)
    if ve is None:
        return None
    if element == "H":
        return (1,) if charge == 0 else (0,)
    ve -= charge
    if ve <= 0 or ve >= 8:
        return (0,)
    if element in _PERIOD2:
        return (ve if ve <= 4 else 8 - ve,)
    if ve <= 4:
        return (ve,)
    if ve == 7 and element in ("Cl", "Br"):
        return (1,)
    return tuple(range(8 - ve, ve + 1, 2))


def _build_graph(tokens: list[SmilesToken]):
    atoms: list[_Atom] = []
    bonds: dict[tuple[int, int], float] = {}
    prev: Optional[int] = None
    pending: Optional[str] = None
    stack: list[Optional[int]] = []
    rings: dict[str, tuple[int, Optional[str]]] = {}

    def add_bond(a: int, b: int, symbol: Optional[str], pos: int):
        if a == b or (min(a, b), max(a, b)) in bonds:
            raise ParseError("duplicate or self bond", pos)
        if symbol is not None:
            order = BOND_ORDERS[symbol]
        elif atoms[a].aromatic and atoms[b].aromatic:
            order = 1.5
        else:
            order = 1.0
        bonds[(min(a, b), max(a, b))] = order

    for ti, tok in enumerate(tokens):
        if tok.kind in ("atom", "bracket_atom"):
            if tok.kind == "atom":
                aromatic = tok.text.islower()
                atom = _Atom(tok.text.capitalize() if aromatic else tok.text, aromatic, False)
            else:
                atom, _ = _parse_bracket(tok)
            atom.token = ti
            atoms.append(atom)
            idx = len(atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending, tok.position)
            elif pending is not None:
                raise ParseError("bond without a preceding atom", tok.position)
            prev, pending = idx, None
        elif tok.kind == "bond_symbol":
            if pending is not None or prev is None:
                raise ParseError("misplaced bond symbol", tok.position)
            pending = tok.text
        elif tok.kind == "branch_open":
            if prev is None:
                raise ParseError("branch without a preceding atom", tok.position)
            stack.append(prev)
        elif tok.kind == "branch_close":
            if pending is not None:
                raise ParseError("dangling bond before ')'", tok.position)
            prev = stack.pop()
        elif tok.kind == "dot":
            if pending is not None or stack:
                raise ParseError("misplaced '.'", tok.position)
            prev = None
        elif tok.kind == "ring_digit":
            if prev is None:
                raise ParseError("ring bond without an atom", tok.position)
            label = tok.text.lstrip("%")
            if tok.ring == "begin":
                rings[label] = (prev, pending)
            else:
                other, sym = rings.pop(label)
                if sym is not None and pending is not None and sym != pending:
                    raise ParseError("conflicting ring-bond symbols", tok.position)
                add_bond(other, prev, sym if sym is not None else pending, tok.position)
            pending = None
    if pending is not None:
        raise ParseError("dangling bond at end of string", tokens[-1].position)
    return atoms, bonds


def _perceive_atoms(tokens: list[SmilesToken]) -> list[tuple[_Atom, AtomPerception]]:
    atoms, bonds = _build_graph(tokens)
    graph = nx.Graph()
    graph.add_nodes_from(range(len(atoms)))
    graph.add_edges_from(bonds)
    bridges = {tuple(sorted(e)) for e in nx.bridges(graph)}
    ring_atoms = {a for e in bonds if e not in bridges for a in e}

    out = []
    for i, atom in enumerate(atoms):
        incident = [order for (a, b), order in bonds.items() if i in (a, b)]
        n_arom = sum(1 for o in incident if o == 1.5)
        other = sum(o for o in incident if o != 1.5)
        n_double = sum(1 for o in incident if o == 2.0)
        n_triple = sum(1 for o in incident if o >= 3.0)
        base = int(n_arom + other)
        allowed = _allowed_valences(atom.element, atom.charge)
        top = max(allowed) if allowed else None

        pi = 0
        if atom.aromatic and n_double == 0:
            donor = atom.element in ("O", "S", "Se", "Te") and atom.charge == 0
            if not donor and allowed is not None:
                if atom.bracket:
                    pi = int(base + atom.hcount + 1 <= top)
                else:
                    pi = int(base + 1 <= min(allowed))
        bond_sum = base + pi

        if atom.bracket:
            h = atom.hcount
            if top is not None and bond_sum + h > top:
                raise InvalidValence(
                    f"{atom.element}{atom.charge:+d} has valence {bond_sum + h} > {top}"
                )
        else:
            fits = [v for v in allowed if v >= bond_sum]
            if not fits:
                raise InvalidValence(f"{atom.element} has valence {bond_sum} > {top}")
            h = fits[0] - bond_sum

        degree = len(incident)
        connections = degree + h
        if atom.aromatic:
            hyb = "sp2"
        elif n_triple or n_double >= 2:
            hyb = "sp"
        elif n_double == 1:
            hyb = "sp2"
        elif connections == 0:
            hyb = "unspecified"
        elif connections <= 4 and atom.element in ("C", "N", "O"):
            hyb = "sp3"
        elif connections == 5:
            hyb = "sp3d"
        elif connections == 6:
            hyb = "sp3d2"
        else:
            hyb = "other"

        chir = None
        if atom.chiral == "@@":
            chir = "R"
        elif atom.chiral == "@":
            chir = "S"
        elif atom.chiral:
            chir = "other"

        out.append((atom, AtomPerception(
            element=atom.element,
            aromatic=atom.aromatic,
            formal_charge=max(-1, min(1, atom.charge)),
            explicit_h=atom.hcount if atom.bracket else 0,
            total_h=h,
            degree=degree,
            valence=bond_sum + h,
            in_ring=i in ring_atoms,
            chirality=chir,
            hybridization=hyb,
        )))
    return out


def perceive(tokens: list[SmilesToken]) -> list[AtomPerception]:
    return [p for _, p in _perceive_atoms(tokens)]


def _atom_bits(p: AtomPerception) -> list[int]:
    bits = [ATOM_TYPE_BASE + (ATOM_TYPES.index(p.element) if p.element in ATOM_TYPES else 4),
            HCOUNT_BASE + min(p.total_h, 3),
            CHARGE_BASE + p.formal_charge + 1,
            VALENCE_BASE + (p.valence - 1 if 1 <= p.valence <= 5 else 5),
            DEGREE_BASE + (p.degree - 1 if 1 <= p.degree <= 4 else 4),
            HYBRID_BASE + HYBRIDIZATIONS.index(p.hybridization)]
    if p.in_ring:
        bits.append(RING_ATOM)
    if p.aromatic:
        bits.append(AROMATIC)
    if p.chirality is not None:
        bits.append(CHIRALITY_BASE + ("R", "S", "other").index(p.chirality))
    return bits


def _digit_bits(ch: str) -> list[int]:
    return [DIGIT_BASE + int(ch) - 2] if ch in "234567" else []


def _bracket_rows(tok: SmilesToken, features: list[int]) -> list[list[int]]:
    m = BRACKET_RE.fullmatch(tok.text)
    rows: list[list[int]] = []
    el_start, el_end = m.span("element")
    h_start = m.start("hcount")
    for k, ch in enumerate(tok.text):
        if el_start <= k < el_end:
            rows.append(list(features))
        elif ch in "+-[]:@":
            rows.append([SYMBOL_BITS[ch]])
        elif ch.isdigit():
            rows.append(_digit_bits(ch))
        elif ch == "H" and k == h_start:
            rows.append([ATOM_TYPE_BASE + ATOM_TYPES.index("H")])
        else:
            rows.append([])  # letters of extended chirality tags such as TH, SP
    return rows


def encode(smiles: str) -> BesGrid:
    tokens = tokenize(smiles)
    if len(smiles) > N_ROWS:
        raise TooLong(f"{len(smiles)} characters exceed the {N_ROWS}-row grid")
    perceived = {atom.token: _atom_bits(p) for atom, p in _perceive_atoms(tokens)}

    rows: list[list[int]] = []
    for ti, tok in enumerate(tokens):
        if tok.kind == "atom":
            rows += [perceived[ti]] * len(tok.text)
        elif tok.kind == "bracket_atom":
            rows += _bracket_rows(tok, perceived[ti])
        elif tok.kind == "ring_digit":
            flag = RING_BEGIN if tok.ring == "begin" else RING_END
            rows += [[flag] + _digit_bits(ch) for ch in tok.text]
        else:
            rows.append([SYMBOL_BITS[tok.text]] if tok.text in SYMBOL_BITS else [])
    assert len(rows) == len(smiles)

    bits = np.zeros((N_ROWS, N_COLS), dtype=np.uint8)
    for r, cols in enumerate(rows):
        bits[r, cols] = 1
    return BesGrid(bits, len(rows))


# --- packed grid files -----------------------------------------------------------
#
# b"BESG" | uint32 version | uint32 columns (57) | uint32 grid rows (400) | uint32 records
# then per record: uint32 id byte length | id (utf-8) | uint32 used rows | used rows as uint64,
# bit c of a row word holding column c.  Rows past the used count are implicit zero padding.

PACKED_MAGIC = b"BESG"
PACKED_VERSION = 1
_COL_WEIGHTS = np.uint64(1) << np.arange(N_COLS, dtype=np.uint64)


class PackedFormatError(ValueError):
    pass


def pack_rows(bits: np.ndarray) -> np.ndarray:
    return (bits.astype(np.uint64) * _COL_WEIGHTS).sum(axis=-1, dtype=np.uint64)


def unpack_rows(words: np.ndarray) -> np.ndarray:
    return ((words[:, None] >> np.arange(N_COLS, dtype=np.uint64)) & np.uint64(1)).astype(np.uint8)


def write_packed(path, records) -> int:
    """Write ``(id, BesGrid)`` pairs; returns the record count."""
    records = list(records)
    with open(path, "wb") as fh:
        fh.write(PACKED_MAGIC + struct.pack("<IIII", PACKED_VERSION, N_COLS, N_ROWS, len(records)))
        for rec_id, grid in records:
            raw = str(rec_id).encode()
            fh.write(struct.pack("<I", len(raw)) + raw + struct.pack("<I", grid.length))
            fh.write(pack_rows(grid.bits[: grid.length]).astype("<u8").tobytes())
    return len(records)


def read_packed(path) -> list[tuple[str, BesGrid]]:
    data = open(path, "rb").read()
    if data[:4] != PACKED_MAGIC:
        raise PackedFormatError(f"{path} is not a packed grid file")
    version, cols, rows, count = struct.unpack_from("<IIII", data, 4)
    if version != PACKED_VERSION or cols != N_COLS or rows != N_ROWS:
        raise PackedFormatError(f"unsupported packed grid layout v{version} {rows}x{cols}")
    off = 20
    out = []
    for _ in range(count):
        (n,) = struct.unpack_from("<I", data, off)
        rec_id = data[off + 4: off + 4 + n].decode()
        off += 4 + n
        (length,) = struct.unpack_from("<I", data, off)
        off += 4
        words = np.frombuffer(data, dtype="<u8", count=length, offset=off).astype(np.uint64)
        off += 8 * length
        bits = np.zeros((N_ROWS, N_COLS), dtype=np.uint8)
        bits[:length] = unpack_rows(words)
        out.append((rec_id, BesGrid(bits, length)))
    return out


def encode_file(src, dst, rejections) -> tuple[int, int]:
    """Encode newline-delimited SMILES (optionally ``smiles<TAB|space>id``).

    Accepted grids go to ``dst`` in the packed format; each rejection becomes a
    JSON line ``{"line", "id", "smiles", "reason", "message"}``.  Returns
    (accepted, rejected).
    """
    accepted, rejected = [], 0
    with open(src) as fin, open(rejections, "w") as rej:
        for lineno, line in enumerate(fin, 1):
            parts = line.split()
            if not parts:
                continue
            smi = parts[0]
            rec_id = parts[1] if len(parts) > 1 else str(lineno)
            try:
                accepted.append((rec_id, encode(smi)))
            except Rejected as exc:
                rejected += 1
                rej.write(json.dumps({"line": lineno, "id": rec_id, "smiles": smi,
                                      "reason": exc.reason, "message": str(exc)}) + "\n")
    write_packed(dst, accepted)
    return len(accepted), rejected
