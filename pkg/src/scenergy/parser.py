"""Template-grammar instruction parser.

Maps rearrangement instructions onto small program trees: ``FilterNode``
(a noun phrase), ``BinaryEBMNode`` (a relation between two noun phrases), and
``MultiAryEBMNode`` (a shape over a group, optionally constrained relative to
a referent). The grammar covers:

* ``put the X REL the Y`` with extra ``, REL the Z`` / ``, and REL the W``
  conjuncts sharing the subject;
* ``put A REL B, put C REL D, and put E REL F`` (independent clauses);
* ``rearrange all X in a SHAPE`` / ``put all X in a SHAPE``;
* ``put all X in a SHAPE in the Y`` and ``a SHAPE of X inside the Y``.

Colors and nouns are open classes (any non-reserved word is accepted), so new
vocabulary flows through to grounding without parser changes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ebm import ConceptKind
from .errors import InstructionParseError

#: surface relation phrases, longest first so prefixes never shadow
RELATION_PHRASES: tuple[tuple[tuple[str, ...], ConceptKind], ...] = (
    (("to", "the", "left", "of"), ConceptKind.LEFT_OF),
    (("to", "the", "right", "of"), ConceptKind.RIGHT_OF),
    (("in", "front", "of"), ConceptKind.IN_FRONT_OF),
    (("on", "top", "of"), ConceptKind.ON_3D),
    (("left", "of"), ConceptKind.LEFT_OF),
    (("right", "of"), ConceptKind.RIGHT_OF),
    (("behind",), ConceptKind.BEHIND),
    (("above",), ConceptKind.BEHIND),
    (("below",), ConceptKind.IN_FRONT_OF),
    (("inside",), ConceptKind.INSIDE),
    (("into",), ConceptKind.INSIDE),
    (("in",), ConceptKind.INSIDE),
    (("on",), ConceptKind.ON_3D),
)

#: canonical wording used when rendering a program back to text
CANONICAL_RELATION = {
    ConceptKind.LEFT_OF: "to the left of",
    ConceptKind.RIGHT_OF: "to the right of",
    ConceptKind.IN_FRONT_OF: "in front of",
    ConceptKind.BEHIND: "behind",
    ConceptKind.INSIDE: "in",
    ConceptKind.ON_3D: "on",
}

SHAPE_WORDS = {"circle": ConceptKind.CIRCLE, "line": ConceptKind.LINE}
SHAPE_NAMES = {v: k for k, v in SHAPE_WORDS.items()}

DETERMINERS = {"the", "a", "an", "all"}
_RESERVED = DETERMINERS | {",", "and", "put", "rearrange", "of"}
_RESERVED |= {word for phrase, _ in RELATION_PHRASES for word in phrase}

IRREGULAR_PLURALS = {"pluses": "plus", "boxes": "box"}
_PLURAL_OF = {v: k for k, v in IRREGULAR_PLURALS.items()}


def singularize(word: str) -> str:
    if word in IRREGULAR_PLURALS:
        return IRREGULAR_PLURALS[word]
    if word.endswith("ss") or word.endswith("us") or not word.endswith("s"):
        return word
    return word[:-1]


def pluralize(word: str) -> str:
    return _PLURAL_OF.get(word, word + "s")


# ---------------------------------------------------------------------------
# program trees


@dataclass(frozen=True)
class FilterNode:
    """A noun phrase: pick scene entities by name and optional color."""

    noun: str
    color: str | None = None
    quantifier: str = "one"  # "one" | "all"

    def __post_init__(self):
        if self.quantifier not in ("one", "all"):
            raise InstructionParseError(f"bad quantifier {self.quantifier!r}")


@dataclass(frozen=True)
class BinaryEBMNode:
    relation: ConceptKind
    subject: FilterNode
    referent: FilterNode


@dataclass(frozen=True)
class MultiAryEBMNode:
    shape: ConceptKind
    members: FilterNode
    constraint: tuple[ConceptKind, FilterNode] | None = None


@dataclass(frozen=True)
class Program:
    goals: tuple


# ---------------------------------------------------------------------------
# parsing


def _tokenize(text: str) -> list[str]:
    cleaned = text.lower().replace(",", " , ")
    for mark in ".!?;":
        cleaned = cleaned.replace(mark, " ")
    return cleaned.split()


class _Cursor:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, offset: int = 0) -> str | None:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def next(self) -> str:
        tok = self.peek()
        if tok is None:
            raise InstructionParseError("unexpected end of instruction")
        self.pos += 1
        return tok

    def expect(self, word: str) -> None:
        tok = self.peek()
        if tok != word:
            raise InstructionParseError(
                f"expected {word!r} at token {self.pos}, found {tok!r}"
            )
        self.pos += 1

    def match_relation(self) -> ConceptKind | None:
        for phrase, kind in RELATION_PHRASES:
            if tuple(self.tokens[self.pos : self.pos + len(phrase)]) == phrase:
                self.pos += len(phrase)
                return kind
        return None

    def at_shape_phrase(self) -> bool:
        """True at ``in/into a circle`` / ``in a line``."""
        return (
            self.peek() in ("in", "into")
            and self.peek(1) in ("a", "an")
            and self.peek(2) in SHAPE_WORDS
        )


def _parse_filter(cur: _Cursor) -> FilterNode:
    determiner = None
    if cur.peek() in DETERMINERS:
        determiner = cur.next()
    words: list[str] = []
    while len(words) < 2:
        tok = cur.peek()
        if tok is None or tok in _RESERVED:
            break
        words.append(cur.next())
    if not words:
        raise InstructionParseError(
            f"expected an object name at token {cur.pos}, found {cur.peek()!r}"
        )
    if len(words) == 2:
        color, noun_word = words
    else:
        color, noun_word = None, words[0]
    noun = singularize(noun_word)
    plural = noun_word != noun
    quantifier = "all" if determiner == "all" or plural else "one"
    return FilterNode(noun=noun, color=color, quantifier=quantifier)


def _parse_shape_tail(cur: _Cursor, members: FilterNode) -> MultiAryEBMNode:
    """After the members NP: ``in a SHAPE`` plus an optional constraint."""
    cur.next()  # in / into
    cur.next()  # a / an
    shape = SHAPE_WORDS[cur.next()]
    constraint = None
    relation = cur.match_relation()
    if relation is not None:
        constraint = (relation, _parse_filter(cur))
    return MultiAryEBMNode(shape=shape, members=members, constraint=constraint)


def _parse_put_clause(cur: _Cursor) -> list:
    cur.expect("put")
    subject = _parse_filter(cur)
    if cur.at_shape_phrase():
        return [_parse_shape_tail(cur, subject)]
    goals: list = []
    while True:
        relation = cur.match_relation()
        if relation is None:
            raise InstructionParseError(
                f"expected a relation at token {cur.pos}, found {cur.peek()!r}"
            )
        goals.append(BinaryEBMNode(relation, subject, _parse_filter(cur)))
        save = cur.pos
        if cur.peek() == ",":
            cur.next()
        elif cur.peek() != "and":
            return goals
        if cur.peek() == "and":
            cur.next()
        # a following "put"/"rearrange" opens a new clause — hand back
        if cur.peek() in ("put", "rearrange") or cur.peek() is None:
            cur.pos = save
            return goals


def _parse_rearrange_clause(cur: _Cursor) -> list:
    cur.expect("rearrange")
    members = _parse_filter(cur)
    if not cur.at_shape_phrase():
        raise InstructionParseError(
            f"expected 'in a circle/line' at token {cur.pos}, found {cur.peek()!r}"
        )
    return [_parse_shape_tail(cur, members)]


def _parse_shape_np(cur: _Cursor) -> list:
    cur.next()  # a / an
    shape = SHAPE_WORDS[cur.next()]
    cur.expect("of")
    members = _parse_filter(cur)
    constraint = None
    relation = cur.match_relation()
    if relation is not None:
        constraint = (relation, _parse_filter(cur))
    return [MultiAryEBMNode(shape=shape, members=members, constraint=constraint)]


def parse(instruction: str) -> Program:
    """Deterministic tree for any sentence in the template grammar."""
    cur = _Cursor(_tokenize(instruction))
    goals: list = []
    while True:
        head = cur.peek()
        if head == "put":
            goals.extend(_parse_put_clause(cur))
        elif head == "rearrange":
            goals.extend(_parse_rearrange_clause(cur))
        elif head in ("a", "an") and cur.peek(1) in SHAPE_WORDS:
            goals.extend(_parse_shape_np(cur))
        else:
            raise InstructionParseError(
                f"cannot start a clause at token {cur.pos}: {head!r}"
            )
        if cur.peek() == ",":
            cur.next()
            if cur.peek() == "and":
                cur.next()
        elif cur.peek() == "and":
            cur.next()
        elif cur.peek() is None:
            return Program(goals=tuple(goals))
        else:
            raise InstructionParseError(
                f"unconsumed token at position {cur.pos}: {cur.peek()!r}"
            )


# ---------------------------------------------------------------------------
# rendering


def render_filter(node: FilterNode) -> str:
    color = f"{node.color} " if node.color else ""
    if node.quantifier == "all":
        return f"all {color}{pluralize(node.noun)}"
    return f"the {color}{node.noun}"


def _render_goal(goal) -> str:
    if isinstance(goal, BinaryEBMNode):
        return (
            f"put {render_filter(goal.subject)} "
            f"{CANONICAL_RELATION[goal.relation]} {render_filter(goal.referent)}"
        )
    if isinstance(goal, MultiAryEBMNode):
        text = f"put {render_filter(goal.members)} in a {SHAPE_NAMES[goal.shape]}"
        if goal.constraint is not None:
            relation, referent = goal.constraint
            text += f" {CANONICAL_RELATION[relation]} {render_filter(referent)}"
        return text
    raise InstructionParseError(f"cannot render goal {goal!r}")


def render_program(program: Program) -> str:
    """Canonical surface text; ``parse`` maps it back to an identical tree."""
    goals = program.goals
    if not goals:
        raise InstructionParseError("cannot render an empty program")
    binary = all(isinstance(g, BinaryEBMNode) for g in goals)
    if len(goals) == 1:
        goal = goals[0]
        if isinstance(goal, MultiAryEBMNode) and goal.constraint is None:
            return (
                f"rearrange {render_filter(goal.members)} "
                f"in a {SHAPE_NAMES[goal.shape]}"
            )
        return _render_goal(goal)
    if binary and len({g.subject for g in goals}) == 1:
        head = _render_goal(goals[0])
        tails = [
            f"{CANONICAL_RELATION[g.relation]} {render_filter(g.referent)}"
            for g in goals[1:]
        ]
        parts = [head] + tails
    else:
        parts = [_render_goal(g) for g in goals]
    return ", ".join(parts[:-1]) + ", and " + parts[-1]


# ---------------------------------------------------------------------------
# s-expressions


def _filter_sexpr(node: FilterNode) -> str:
    fields = [node.noun]
    if node.color:
        fields.append(node.color)
    if node.quantifier == "all":
        fields.append("all")
    return "(filter " + " ".join(fields) + ")"


def _goal_sexpr(goal) -> str:
    if isinstance(goal, BinaryEBMNode):
        return (
            f"(binary {goal.relation.value} "
            f"{_filter_sexpr(goal.subject)} {_filter_sexpr(goal.referent)})"
        )
    relation = ""
    if goal.constraint is not None:
        kind, referent = goal.constraint
        relation = f" (constraint {kind.value} {_filter_sexpr(referent)})"
    return f"(multiary {goal.shape.value} {_filter_sexpr(goal.members)}{relation})"


def program_to_sexpr(program: Program) -> str:
    parts = [_goal_sexpr(g) for g in program.goals]
    if len(parts) == 1:
        return parts[0]
    return "(and " + " ".join(parts) + ")"
