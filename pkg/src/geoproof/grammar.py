"""Table of known CDL heads.

Each entry fixes the arity and argument kinds of a head, how the head is
canonicalized, how established facts are grouped in verifier feedback and,
for measures, the prefix of the solver symbol.  New predicates are added by
calling :func:`register_head`; the parser and canonicalizer read this table
and need no changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# argument kinds
POINTS = "points"  # run of uppercase point letters, e.g. ABC
EXPR = "expr"  # arithmetic expression or nested term
ANY = "any"


@dataclass(frozen=True)
class HeadSpec:
    name: str
    args: tuple[str, ...] | None  # None means variadic
    symmetry: str = "none"
    category: str = "relation"  # relation | measure | arith | entity | wrapper
    symbol_prefix: str | None = None
    heading: str | None = None
    extends: tuple[str, ...] = field(default_factory=tuple)
    params: str | None = None  # letter pattern used by `extends`, e.g. "AB,CD"
    min_args: int = 1


HEADS: dict[str, HeadSpec] = {}


def register_head(spec: HeadSpec) -> None:
    HEADS[spec.name] = spec


def _reg(name, args, **kw):
    register_head(HeadSpec(name, args, **kw))


# entities and construction
_reg("Point", (POINTS,), category="entity")
_reg("Line", (POINTS,), symmetry="line", category="entity")
_reg("Angle", (POINTS,), symmetry="angle", category="entity")
_reg("Arc", (POINTS,), category="entity")
_reg("Circle", (POINTS,), category="entity")
_reg("Shape", None, symmetry="shape", category="entity")
_reg("Polygon", (POINTS,), symmetry="polygon", category="entity", heading="Polygons")
_reg("Collinear", (POINTS,), symmetry="collinear", heading="Collinear Points")
_reg("Cocircular", (POINTS, POINTS), symmetry="cocircular", heading="Cocircular Points")

# relations
_reg(
    "ParallelBetweenLine",
    (POINTS, POINTS),
    symmetry="parallel",
    heading="Parallel Lines",
)
_reg(
    "PerpendicularBetweenLine",
    (POINTS, POINTS),
    symmetry="perpendicular",
    heading="Perpendicular Lines",
    params="AO,CO",
    extends=("Equal(MeasureOfAngle(AOC),90)",),
)
_reg("IsCentreOfCircle", (POINTS, POINTS), heading="Circles")
_reg("IsDiameterOfCircle", (POINTS, POINTS), symmetry="line_first", heading="Circle Diameters")
_reg("IsTangentOfCircle", (POINTS, POINTS), heading="Tangent Lines")
_reg(
    "IsMidpointOfLine",
    (POINTS, POINTS),
    symmetry="line_second",
    heading="Midpoints",
    params="M,AB",
    extends=("Collinear(AMB)", "Equal(LengthOfLine(AM),LengthOfLine(MB))"),
)
_reg(
    "IsBisectorOfAngle",
    (POINTS, POINTS),
    symmetry="angle_second",
    heading="Angle Bisectors",
    params="BD,ABC",
    extends=("Equal(MeasureOfAngle(ABD),MeasureOfAngle(DBC))",),
)
_reg(
    "RightTriangle",
    (POINTS,),
    symmetry="angle",
    heading="Right Triangles",
    params="ABC",
    extends=("Polygon(ABC)", "PerpendicularBetweenLine(AB,CB)"),
)
_reg(
    "IsoscelesTriangle",
    (POINTS,),
    symmetry="isosceles",
    heading="Isosceles Triangles",
    params="ABC",
    extends=("Polygon(ABC)", "Equal(LengthOfLine(AB),LengthOfLine(AC))"),
)
_reg(
    "EquilateralTriangle",
    (POINTS,),
    symmetry="polygon",
    heading="Equilateral Triangles",
    params="ABC",
    extends=(
        "IsoscelesTriangle(ABC)",
        "IsoscelesTriangle(BCA)",
        "IsoscelesTriangle(CAB)",
    ),
)
_reg("SimilarBetweenTriangle", (POINTS, POINTS), symmetry="triangle_pair", heading="Similar Triangles")
_reg(
    "CongruentBetweenTriangle",
    (POINTS, POINTS),
    symmetry="triangle_pair",
    heading="Congruent Triangles",
)
_reg(
    "Parallelogram",
    (POINTS,),
    symmetry="polygon",
    heading="Parallelograms",
    params="ABCD",
    extends=(
        "Polygon(ABCD)",
        "ParallelBetweenLine(AD,BC)",
        "ParallelBetweenLine(BA,CD)",
    ),
)
_reg(
    "Rectangle",
    (POINTS,),
    symmetry="polygon",
    heading="Rectangles",
    params="ABCD",
    extends=(
        "Parallelogram(ABCD)",
        "PerpendicularBetweenLine(AB,CB)",
        "PerpendicularBetweenLine(BC,DC)",
        "PerpendicularBetweenLine(CD,AD)",
        "PerpendicularBetweenLine(DA,BA)",
    ),
)
_reg(
    "Rhombus",
    (POINTS,),
    symmetry="polygon",
    heading="Rhombuses",
    params="ABCD",
    extends=(
        "Parallelogram(ABCD)",
        "Equal(LengthOfLine(AB),LengthOfLine(BC))",
    ),
)
_reg(
    "Square",
    (POINTS,),
    symmetry="polygon",
    heading="Squares",
    params="ABCD",
    extends=("Rectangle(ABCD)", "Rhombus(ABCD)"),
)

# measures, each backed by one solver symbol
_reg("MeasureOfAngle", (POINTS,), symmetry="angle", category="measure", symbol_prefix="ma")
_reg("LengthOfLine", (POINTS,), symmetry="line", category="measure", symbol_prefix="ll")
_reg("MeasureOfArc", (POINTS,), category="measure", symbol_prefix="mar")
_reg("LengthOfArc", (POINTS,), category="measure", symbol_prefix="la")
_reg("RadiusOfCircle", (POINTS,), category="measure", symbol_prefix="rc")
_reg("DiameterOfCircle", (POINTS,), category="measure", symbol_prefix="dc")
_reg("PerimeterOfTriangle", (POINTS,), symmetry="polygon", category="measure", symbol_prefix="pt")
_reg("AreaOfTriangle", (POINTS,), symmetry="polygon", category="measure", symbol_prefix="at")
_reg("PerimeterOfQuadrilateral", (POINTS,), symmetry="polygon", category="measure", symbol_prefix="pq")
_reg("AreaOfQuadrilateral", (POINTS,), symmetry="polygon", category="measure", symbol_prefix="aq")
_reg("PerimeterOfCircle", (POINTS,), category="measure", symbol_prefix="pc")
_reg("AreaOfCircle", (POINTS,), category="measure", symbol_prefix="ac")

# arithmetic
_reg("Equal", (EXPR, EXPR), symmetry="commutative", category="relation")
_reg("Value", (EXPR,), category="wrapper")
_reg("Add", None, symmetry="commutative", category="arith", min_args=2)
_reg("Mul", None, symmetry="commutative", category="arith", min_args=2)
_reg("Sub", (EXPR, EXPR), category="arith")
_reg("Div", (EXPR, EXPR), category="arith")
_reg("Pow", (EXPR, EXPR), category="arith")
_reg("Neg", (EXPR,), category="arith")
_reg("Sqrt", (EXPR,), category="arith")
_reg("Sin", (EXPR,), category="trig")
_reg("Cos", (EXPR,), category="trig")
_reg("Tan", (EXPR,), category="trig")
_reg("ArcSin", (EXPR,), category="inverse_trig")
_reg("ArcCos", (EXPR,), category="inverse_trig")
_reg("ArcTan", (EXPR,), category="inverse_trig")

# lowercase function names accepted inside infix expressions
FUNCTION_ALIASES = {
    "sqrt": "Sqrt",
    "sin": "Sin",
    "cos": "Cos",
    "tan": "Tan",
    "asin": "ArcSin",
    "acos": "ArcCos",
    "atan": "ArcTan",
    "arcsin": "ArcSin",
    "arccos": "ArcCos",
    "arctan": "ArcTan",
}

HEADING_ORDER = (
    "Perpendicular Lines",
    "Parallel Lines",
    "Collinear Points",
    "Cocircular Points",
    "Circles",
    "Circle Diameters",
    "Tangent Lines",
    "Midpoints",
    "Angle Bisectors",
    "Right Triangles",
    "Isosceles Triangles",
    "Equilateral Triangles",
    "Similar Triangles",
    "Congruent Triangles",
    "Parallelograms",
    "Rectangles",
    "Rhombuses",
    "Squares",
    "Polygons",
    "Other Facts",
)


def spec_for(head: str) -> HeadSpec | None:
    return HEADS.get(head)


def is_measure(head: str) -> bool:
    spec = HEADS.get(head)
    return spec is not None and spec.category == "measure"
