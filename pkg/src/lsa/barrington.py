"""Width-5 permutation branching programs for Boolean formulas.

A program *sigma-computes* a formula ``f`` when the ordered product of its
selected instructions equals the 5-cycle ``sigma`` on inputs where ``f`` is
true and the identity where ``f`` is false.  The compiler builds such programs
recursively:

* a literal ``x_i`` is one instruction ``(i, e, sigma)``;
* ``not f`` appends ``sigma^-1`` to a program for ``f`` (folded into its last
  instruction) and conjugates the result so the accepted value is ``sigma``;
* ``f and g`` is ``P_f^-1 P_g^-1 P_f P_g`` where ``P_f`` alpha-computes ``f``,
  ``P_g`` beta-computes ``g`` and ``[alpha, beta] = sigma``;
* ``f or g`` is ``not (not f and not g)``.

Every program for a formula of depth ``d`` has exactly ``4**d`` instructions;
shallower subprograms are padded with identity instructions.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

from .groups import Permutation, ParseError, commutator, compose, parse_cycles

DEFAULT_SIGMA = parse_cycles("(0 1 2 3 4)")
IDENTITY5 = Permutation.identity(5)


class CompilationError(ValueError):
    pass


class CompilationInvariantError(RuntimeError):
    """A program evaluated to something other than the identity or its accept cycle."""


# Formula tree

@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Not:
    operand: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


Formula = Union[Var, Not, And, Or]


def depth(f: Formula) -> int:
    """Longest root-to-leaf path counting AND/OR nodes only."""
    if isinstance(f, Var):
        return 0
    if isinstance(f, Not):
        return depth(f.operand)
    return 1 + max(depth(f.left), depth(f.right))


def num_vars(f: Formula) -> int:
    return max(variables(f), default=-1) + 1


def variables(f: Formula) -> set[int]:
    if isinstance(f, Var):
        return {f.index}
    if isinstance(f, Not):
        return variables(f.operand)
    return variables(f.left) | variables(f.right)


def evaluate_formula(f: Formula, assignment: Sequence[int]) -> bool:
    if isinstance(f, Var):
        return bool(assignment[f.index])
    if isinstance(f, Not):
        return not evaluate_formula(f.operand, assignment)
    if isinstance(f, And):
        return evaluate_formula(f.left, assignment) and evaluate_formula(f.right, assignment)
    return evaluate_formula(f.left, assignment) or evaluate_formula(f.right, assignment)


def normalize(f: Formula, negate: bool = False) -> Formula:
    """Push negations down to the variables with De Morgan's laws."""
    if isinstance(f, Var):
        return Not(f) if negate else f
    if isinstance(f, Not):
        return normalize(f.operand, not negate)
    left, right = normalize(f.left, negate), normalize(f.right, negate)
    if isinstance(f, And):
        return Or(left, right) if negate else And(left, right)
    return And(left, right) if negate else Or(left, right)


def is_normalized(f: Formula) -> bool:
    if isinstance(f, Var):
        return True
    if isinstance(f, Not):
        return isinstance(f.operand, Var)
    return is_normalized(f.left) and is_normalized(f.right)


def to_text(f: Formula) -> str:
    if isinstance(f, Var):
        return f"x{f.index}"
    if isinstance(f, Not):
        return "!" + to_text(f.operand)
    op = "&" if isinstance(f, And) else "|"
    return f"({to_text(f.left)} {op} {to_text(f.right)})"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            raise ParseError(f"expected {ch!r} but found {found}", self.pos)
        self.pos += 1

    def formula(self) -> Formula:
        ch = self.peek()
        if ch == "x":
            start = self.pos
            self.pos += 1
            digits_start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
            if self.pos == digits_start:
                raise ParseError("variable needs an index", start)
            return Var(int(self.text[digits_start : self.pos]))
        if ch == "!":
            self.pos += 1
            return Not(self.formula())
        if ch == "(":
            self.pos += 1
            left = self.formula()
            op = self.peek()
            if op not in ("&", "|"):
                found = repr(op) if op else "end of input"
                raise ParseError(f"expected '&' or '|' but found {found}", self.pos)
            self.pos += 1
            right = self.formula()
            self.expect(")")
            return And(left, right) if op == "&" else Or(left, right)
        found = repr(ch) if ch else "end of input"
        raise ParseError(f"expected a formula but found {found}", self.pos)


def parse_formula(text: str) -> Formula:
    """Parse ``f := xN | !f | (f & f) | (f | f)`` and normalize negations."""
    parser = _Parser(text)
    f = parser.formula()
    if parser.peek():
        raise ParseError(f"unexpected trailing input {parser.peek()!r}", parser.pos)
    return normalize(f)


def random_formula(rng: random.Random, max_depth: int, n_vars: int, negation_prob: float = 0.3) -> Formula:
    """Random formula with depth at most ``max_depth`` (exactly, at the root, when > 0)."""
    if max_depth == 0:
        v = Var(rng.randrange(n_vars))
        return Not(v) if rng.random() < negation_prob else v
    left = random_formula(rng, max_depth - 1, n_vars, negation_prob)
    right = random_formula(rng, rng.randrange(max_depth), n_vars, negation_prob)
    if rng.random() < 0.5:
        left, right = right, left
    node = And(left, right) if rng.random() < 0.5 else Or(left, right)
    return normalize(Not(node)) if rng.random() < negation_prob else node


# Branching programs

@dataclass(frozen=True)
class Instruction:
    var: int
    if_false: Permutation
    if_true: Permutation


@dataclass(frozen=True)
class BranchingProgram:
    instructions: tuple
    accept_cycle: Permutation

    def __len__(self):
        return len(self.instructions)

    def to_json(self) -> dict:
        return {
            "width": 5,
            "accept_cycle": self.accept_cycle.cycle_string(),
            "length": len(self.instructions),
            "instructions": [
                [ins.var, ins.if_false.cycle_string(), ins.if_true.cycle_string()]
                for ins in self.instructions
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BranchingProgram":
        instructions = tuple(
            Instruction(int(v), parse_cycles(a, 5), parse_cycles(b, 5)) for v, a, b in data["instructions"]
        )
        return cls(instructions, parse_cycles(data["accept_cycle"], 5))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def is_five_cycle(p: Permutation) -> bool:
    return p.degree == 5 and [len(c) for c in p.cycles()] == [5]


@lru_cache(maxsize=None)
def _five_cycles() -> tuple:
    perms = (Permutation(images) for images in itertools.permutations(range(5)))
    return tuple(p for p in perms if is_five_cycle(p))


@lru_cache(maxsize=None)
def _base_commutator_pair() -> tuple:
    """First pair of 5-cycles (in lexicographic order) whose commutator is the default sigma."""
    for a in _five_cycles():
        for b in _five_cycles():
            if commutator(a, b) == DEFAULT_SIGMA:
                return a, b
    raise AssertionError("no commutator pair found")


@lru_cache(maxsize=None)
def _conjugator(source: Permutation, target: Permutation) -> Permutation:
    """Some ``pi`` with ``pi * source * pi^-1 == target`` (both 5-cycles)."""
    for images in itertools.permutations(range(5)):
        pi = Permutation(images, check=False)
        if compose(compose(pi, source), pi.inverse()) == target:
            return pi
    raise CompilationError(f"{source} and {target} are not conjugate")


def _conj(pi: Permutation, p: Permutation) -> Permutation:
    return compose(compose(pi, p), pi.inverse())


@lru_cache(maxsize=None)
def commutator_pair(sigma: Permutation) -> tuple:
    """5-cycles ``(alpha, beta)`` with ``commutator(alpha, beta) == sigma``."""
    a, b = _base_commutator_pair()
    pi = _conjugator(DEFAULT_SIGMA, sigma)
    return _conj(pi, a), _conj(pi, b)


def _invert(program: list) -> list:
    return [Instruction(i.var, i.if_false.inverse(), i.if_true.inverse()) for i in reversed(program)]


def _conjugate_program(program: list, pi: Permutation) -> list:
    return [Instruction(i.var, _conj(pi, i.if_false), _conj(pi, i.if_true)) for i in program]


def _pad(program: list, length: int) -> list:
    if len(program) < length:
        var = program[0].var
        program = program + [Instruction(var, IDENTITY5, IDENTITY5)] * (length - len(program))
    return program


def _negate(program: list, sigma: Permutation) -> list:
    """Turn a program sigma-computing f into one sigma-computing not f."""
    inv = sigma.inverse()
    last = program[-1]
    program = program[:-1] + [Instruction(last.var, compose(last.if_false, inv), compose(last.if_true, inv))]
    return _conjugate_program(program, _conjugator(inv, sigma))


def _compile(f: Formula, sigma: Permutation) -> list:
    if isinstance(f, Var):
        return [Instruction(f.index, IDENTITY5, sigma)]
    if isinstance(f, Not):
        return _negate(_compile(f.operand, sigma), sigma)
    if isinstance(f, Or):
        return _negate(_compile(And(normalize(f.left, True), normalize(f.right, True)), sigma), sigma)
    alpha, beta = commutator_pair(sigma)
    size = 4 ** (depth(f) - 1)
    left = _pad(_compile(f.left, alpha), size)
    right = _pad(_compile(f.right, beta), size)
    return _invert(left) + _invert(right) + left + right


def compile_formula(f: Formula, sigma: Permutation = DEFAULT_SIGMA) -> BranchingProgram:
    """Compile a normalized formula to a program that sigma-computes it."""
    if not is_five_cycle(sigma):
        raise CompilationError(f"{sigma.cycle_string()} is not a 5-cycle")
    if not is_normalized(f):
        raise CompilationError("formula must have negations only on variables")
    return BranchingProgram(tuple(_compile(f, sigma)), sigma)


def evaluate(program: BranchingProgram, assignment: Sequence[int]) -> Permutation:
    """Ordered product of the instruction permutations selected by ``assignment``."""
    acc = IDENTITY5
    for ins in program.instructions:
        if ins.var >= len(assignment):
            raise IndexError(f"assignment has no value for x{ins.var}")
        acc = compose(acc, ins.if_true if assignment[ins.var] else ins.if_false)
    return acc


def decide(program: BranchingProgram, assignment: Sequence[int]) -> bool:
    value = evaluate(program, assignment)
    if value == program.accept_cycle:
        return True
    if value.is_identity():
        return False
    raise CompilationInvariantError(
        f"program evaluated to {value.cycle_string()}, expected () or {program.accept_cycle.cycle_string()}"
    )


def program_word(program: BranchingProgram, assignment: Sequence[int]) -> list[Permutation]:
    """The sequence of permutations a program selects on one input."""
    return [ins.if_true if assignment[ins.var] else ins.if_false for ins in program.instructions]


def truth_table_report(f: Formula, program: BranchingProgram, n: int | None = None) -> dict:
    """Exhaustively compare ``decide`` against direct evaluation."""
    n = max(num_vars(f), n or 0)
    mismatches = []
    true_count = 0
    for bits in itertools.product((0, 1), repeat=n):
        expected = evaluate_formula(f, bits)
        got = decide(program, bits)
        true_count += got
        if got != expected:
            mismatches.append("".join(map(str, bits)))
    return {
        "num_vars": n,
        "assignments": 2**n,
        "true_count": true_count,
        "mismatches": mismatches,
        "verified": not mismatches,
    }
