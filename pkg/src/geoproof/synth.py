"""Synthetic FormalGeo-style problems.

Each problem is a chain of small figure "gadgets" (a triangle angle sum, a
pair of parallels cut by a transversal, a tangent to a circle, ...).  A gadget
owns its point letters, states true facts about its figure, and knows the
theorem calls that derive its target measure.  Gadgets are chained by stating
the next gadget's input as an equation in the previous gadget's target, so
the proof of the whole problem is the concatenation of gadget proofs and the
problem level is its step count.

Answers are computed here with exact sympy arithmetic, independently of the
verifier; tests check that the two agree.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

import sympy as sp

from geoproof.cdl import parse_term
from geoproof.dataset import Problem, load_problem

LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


class OutOfLetters(RuntimeError):
    pass


class Letters:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.free = list(LETTERS)
        rng.shuffle(self.free)

    def take(self, n: int) -> list[str]:
        if n > len(self.free):
            raise OutOfLetters()
        out, self.free = self.free[:n], self.free[n:]
        return out


@dataclass
class Piece:
    construction: list[str]
    conditions: list[str]
    proof: list[str]
    target: str
    value: sp.Expr
    input_term: str | None = None
    input_value: sp.Expr | None = None
    image: list[str] = field(default_factory=list)
    extras: list[str] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.proof)


def num(v) -> str:
    return str(sp.nsimplify(v)).replace("**", "^").replace(" ", "")


def eq(a: str, b) -> str:
    return f"Equal({a},{b if isinstance(b, str) else num(b)})"


def ma(s: str) -> str:
    return f"MeasureOfAngle({s})"


def ll(s: str) -> str:
    return f"LengthOfLine({s})"


def _rot(s: str, rng: random.Random) -> str:
    """A random equivalent spelling of a polygon name."""
    i = rng.randrange(len(s))
    s = s[i:] + s[:i]
    return s[::-1] if rng.random() < 0.5 else s


def _par(a: str, b: str, rng: random.Random) -> str:
    a, b = rng.choice([(a, b), (b, a), (a[::-1], b[::-1]), (b[::-1], a[::-1])])
    return f"ParallelBetweenLine({a},{b})"


def _shape(*edges: str) -> str:
    return f"Shape({','.join(edges)})"


def _tri_shape(a: str, b: str, c: str) -> str:
    return _shape(a + b, b + c, c + a)


def _quad_shape(a, b, c, d) -> str:
    return _shape(a + b, b + c, c + d, d + a)


DEG = sp.pi / 180
TABLE_ANGLES = (30, 45, 60, 90, 120, 135, 150)


# angle gadgets --------------------------------------------------------------


def g_triangle_sum(rng, L):
    A, B, C = L.take(3)
    b = rng.randint(20, 110)
    c = rng.randint(15, 160 - b)
    names = [(A + B + C, b), (B + C + A, c)]
    rng.shuffle(names)
    (i_ang, i_val), (o_ang, o_val) = names
    return Piece(
        [_tri_shape(A, B, C)],
        [eq(ma(o_ang), o_val)],
        [f"triangle_property_angle_sum(1,{_rot(A + B + C, rng)})"],
        ma(C + A + B),
        sp.Integer(180 - b - c),
        ma(i_ang),
        sp.Integer(i_val),
        extras=[eq(ll(A + B), rng.randint(3, 15))],
    )


def g_adjacent(rng, L):
    A, B, C, D = L.take(4)
    a = rng.randint(20, 160)
    return Piece(
        [f"Collinear({A}{B}{C})", _tri_shape(A, B, D), _tri_shape(D, B, C)],
        [],
        [f"adjacent_complementary_angle(1,{A}{B}{D},{D}{B}{C})"],
        ma(D + B + C),
        sp.Integer(180 - a),
        ma(A + B + D),
        sp.Integer(a),
    )


def g_vertical(rng, L):
    A, O, B, C, D = L.take(5)
    a = rng.randint(20, 160)
    return Piece(
        [f"Collinear({A}{O}{B})", f"Collinear({C}{O}{D})", _tri_shape(A, O, C), _tri_shape(B, O, D)],
        [],
        [f"vertical_angle(1,{A}{O}{C},{B}{O}{D})"],
        ma(B + O + D),
        sp.Integer(a),
        ma(A + O + C),
        sp.Integer(a),
    )


def g_alternate(rng, L):
    A, B, C, D = L.take(4)
    a = rng.randint(20, 150)
    if rng.random() < 0.6:
        cons = [_tri_shape(A, B, D), _tri_shape(A, D, C)]
        return Piece(cons, [], [f"parallel_property_alternate_interior_angle(1,{A}{B},{C}{D})"],
                     ma(C + D + A), sp.Integer(a), ma(B + A + D), sp.Integer(a),
                     image=[_par(A + B, C + D, rng)])
    cons = [_tri_shape(A, B, C), _tri_shape(C, B, D)]
    return Piece(cons, [], [f"parallel_property_alternate_interior_angle(2,{A}{B},{C}{D})"],
                 ma(B + C + D), sp.Integer(a), ma(A + B + C), sp.Integer(a),
                 image=[_par(A + B, C + D, rng)])


def g_corresponding(rng, L):
    A, B, C, D, E = L.take(5)
    a = rng.randint(20, 160)
    quad = _quad_shape(A, B, D, C)
    if rng.random() < 0.5:
        return Piece([f"Collinear({E}{A}{C})", quad], [],
                     [f"parallel_property_corresponding_angle(1,{A}{B},{C}{D},{E})"],
                     ma(A + C + D), sp.Integer(a), ma(E + A + B), sp.Integer(a),
                     image=[_par(A + B, C + D, rng)])
    return Piece([f"Collinear({A}{C}{E})", quad], [],
                 [f"parallel_property_corresponding_angle(2,{A}{B},{C}{D},{E})"],
                 ma(D + C + E), sp.Integer(a), ma(B + A + C), sp.Integer(a),
                 image=[_par(A + B, C + D, rng)])


def g_ipsilateral(rng, L):
    A, B, C, D = L.take(4)
    a = rng.randint(20, 160)
    return Piece([_quad_shape(A, B, D, C)], [],
                 [f"parallel_property_ipsilateral_internal_angle(1,{A}{B},{C}{D})"],
                 ma(A + C + D), sp.Integer(180 - a), ma(B + A + C), sp.Integer(a),
                 image=[_par(A + B, C + D, rng)])


def g_parallel_judgment(rng, L):
    A, B, C, D, E = L.take(5)
    a = rng.randint(20, 160)
    return Piece([f"Collinear({E}{A}{C})", _quad_shape(A, B, D, C)],
                 [eq(ma(A + C + D), a)],
                 [f"parallel_judgment_corresponding_angle(1,{A}{B},{C}{D},{E})",
                  f"parallel_property_ipsilateral_internal_angle(1,{A}{B},{C}{D})"],
                 ma(B + A + C), sp.Integer(180 - a), ma(E + A + B), sp.Integer(a))


def g_parallel_extend(rng, L):
    A, M, B, C, D = L.take(5)
    a = rng.randint(20, 150)
    return Piece([f"Collinear({A}{M}{B})", _tri_shape(M, B, D), _quad_shape(A, M, D, C)], [],
                 [f"parallel_property_collinear_extend(2,{A}{B},{C}{D},{M})",
                  f"parallel_property_alternate_interior_angle(1,{M}{B},{C}{D})"],
                 ma(C + D + M), sp.Integer(a), ma(B + M + D), sp.Integer(a),
                 image=[_par(A + B, C + D, rng)])


def g_isosceles_angle(rng, L):
    A, B, C = L.take(3)
    cons = [_tri_shape(A, B, C)]
    cond = [eq(ll(A + B), ll(A + C))]
    calls = [f"isosceles_triangle_judgment_line_equal(1,{A}{B}{C})",
             f"isosceles_triangle_property_angle_equal(1,{A}{B}{C})"]
    if rng.random() < 0.5:
        c = rng.randint(20, 85)
        return Piece(cons, cond, calls, ma(A + B + C), sp.Integer(c), ma(B + C + A), sp.Integer(c))
    a = rng.randint(10, 160)
    return Piece(cons, cond, calls + [f"triangle_property_angle_sum(1,{_rot(A + B + C, rng)})"],
                 ma(A + B + C), sp.Rational(180 - a, 2), ma(C + A + B), sp.Integer(a))


def g_angle_addition(rng, L):
    A, B, C, D = L.take(4)
    p = rng.randint(10, 90)
    q = rng.randint(10, 170 - p)
    cons = [_tri_shape(A, B, D), _tri_shape(D, B, C)]
    if rng.random() < 0.5:
        cons.append(f"Collinear({A}{D}{C})")
    if rng.random() < 0.5:
        return Piece(cons, [eq(ma(D + B + C), q)], [f"angle_addition(1,{A}{B}{D},{D}{B}{C})"],
                     ma(A + B + C), sp.Integer(p + q), ma(A + B + D), sp.Integer(p))
    return Piece(cons, [eq(ma(A + B + C), p + q)], [f"angle_addition(1,{A}{B}{D},{D}{B}{C})"],
                 ma(D + B + C), sp.Integer(q), ma(A + B + D), sp.Integer(p))


def g_bisector(rng, L):
    A, B, C, D = L.take(4)
    a = rng.randint(20, 170)
    return Piece([_tri_shape(A, B, D), _tri_shape(D, B, C)], [f"IsBisectorOfAngle({B}{D},{A}{B}{C})"],
                 [f"angle_addition(1,{A}{B}{D},{D}{B}{C})"],
                 ma(A + B + D), sp.Rational(a, 2), ma(A + B + C), sp.Integer(a))


def g_arc(rng, L):
    O, A, B, C = L.take(4)
    a = rng.randint(20, 170)
    return Piece([f"Cocircular({O},{A}{B}{C})", _quad_shape(O, A, C, B)], [f"IsCentreOfCircle({O},{O})"],
                 [f"arc_property_center_angle(1,{O}{A}{B},{O})",
                  f"arc_property_circumference_angle_external(1,{O}{A}{B},{C})"],
                 ma(B + C + A), sp.Rational(a, 2), ma(B + O + A), sp.Integer(a))


def g_diameter_angle(rng, L):
    O, A, B, C = L.take(4)
    a = rng.randint(10, 80)
    return Piece([f"Cocircular({O},{A}{B}{C})", f"Collinear({A}{O}{B})", _shape(A + C, C + B, B + O, O + A)],
                 [f"IsCentreOfCircle({O},{O})", f"IsDiameterOfCircle({A}{B},{O})"],
                 [f"diameter_of_circle_property_right_angle(1,{B}{C}{A},{O})",
                  f"triangle_property_angle_sum(1,{_rot(A + B + C, rng)})"],
                 ma(A + B + C), sp.Integer(90 - a), ma(C + A + B), sp.Integer(a))


def g_tangent_angle(rng, L):
    O, A, P = L.take(3)
    a = rng.randint(10, 80)
    return Piece([f"Cocircular({O},{A})", _tri_shape(P, A, O)],
                 [f"IsCentreOfCircle({O},{O})", f"IsTangentOfCircle({P}{A},{O})"],
                 [f"tangent_of_circle_property_perpendicular(1,{P}{A},{O},{O})",
                  f"triangle_property_angle_sum(1,{_rot(P + A + O, rng)})"],
                 ma(A + O + P), sp.Integer(90 - a), ma(A + P + O), sp.Integer(a))


def g_quad_sum(rng, L):
    A, B, C, D = L.take(4)
    while True:
        a, b, c = rng.randint(40, 150), rng.randint(40, 150), rng.randint(40, 150)
        d = 360 - a - b - c
        if 30 <= d <= 160:
            break
    return Piece([_quad_shape(A, B, C, D)], [eq(ma(A + B + C), b), eq(ma(B + C + D), c)],
                 [f"quadrilateral_property_angle_sum(1,{_rot(A + B + C + D, rng)})"],
                 ma(C + D + A), sp.Integer(d), ma(D + A + B), sp.Integer(a))


def g_parallelogram_angle(rng, L):
    A, B, C, D = L.take(4)
    a = rng.randint(30, 150)
    var = rng.choice([1, 2])
    src, dst = ((A + B + C, C + D + A) if var == 1 else (D + A + B, B + C + D))
    calls = [f"parallelogram_property_opposite_angle_equal({var},{A}{B}{C}{D})"]
    if rng.random() < 0.4:
        image = [_par(A + D, B + C, rng), _par(B + A, C + D, rng)]
        calls.insert(0, f"parallelogram_judgment_parallel_and_parallel(1,{A}{B}{C}{D})")
        cond = []
    else:
        image, cond = [], [f"Parallelogram({_rot(A + B + C + D, rng)})"]
    return Piece([_quad_shape(A, B, C, D)], cond, calls, ma(dst), sp.Integer(a), ma(src), sp.Integer(a), image=image)


def g_similar_angle(rng, L):
    A, B, C, D, E, F = L.take(6)
    var = rng.choice([1, 2, 3])
    pairs = {1: (A + B + C, D + E + F), 2: (B + C + A, E + F + D), 3: (C + A + B, F + D + E)}
    src, dst = pairs[var]
    a = rng.randint(20, 120)
    return Piece([_tri_shape(A, B, C), _tri_shape(D, E, F)],
                 [f"SimilarBetweenTriangle({A}{B}{C},{D}{E}{F})"],
                 [f"similar_triangle_property_angle_equal({var},{A}{B}{C},{D}{E}{F})"],
                 ma(dst), sp.Integer(a), ma(src), sp.Integer(a))


def g_congruent_angle(rng, L):
    A, B, C, D, E, F = L.take(6)
    p, q, b = rng.randint(3, 12), rng.randint(3, 12), rng.randint(30, 120)
    a = rng.randint(15, 170 - b)
    return Piece([_tri_shape(A, B, C), _tri_shape(D, E, F)],
                 [eq(ll(A + B), p), eq(ll(D + E), p), eq(ma(A + B + C), b), eq(ma(D + E + F), b),
                  eq(ll(B + C), q), eq(ll(E + F), q)],
                 [f"congruent_triangle_judgment_sas(1,{A}{B}{C},{D}{E}{F})",
                  f"congruent_triangle_property_angle_equal(2,{A}{B}{C},{D}{E}{F})"],
                 ma(F + D + E), sp.Integer(a), ma(C + A + B), sp.Integer(a))


def g_equilateral(rng, L):
    A, B, C = L.take(3)
    return Piece([_tri_shape(A, B, C)], [f"EquilateralTriangle({_rot(A + B + C, rng)})"],
                 [f"equilateral_triangle_property_angle(1,{A}{B}{C})"], ma(C + A + B), sp.Integer(60))


def g_perpendicular_extend(rng, L):
    A, B, C, D = L.take(4)
    c = rng.randint(10, 80)
    given = rng.random() < 0.5
    calls = [f"perpendicular_property_collinear_extend(1,{A}{B},{C}{B},{D})",
             f"triangle_property_angle_sum(1,{_rot(D + B + C, rng)})"]
    cond = [f"PerpendicularBetweenLine({A}{B},{C}{B})"] if given else [eq(ma(A + B + C), 90)]
    if not given:
        calls.insert(0, f"perpendicular_judgment_angle(1,{A}{B},{C}{B})")
    return Piece([f"Collinear({A}{B}{D})", _tri_shape(A, B, C), _tri_shape(C, B, D)], cond, calls,
                 ma(C + D + B), sp.Integer(90 - c), ma(B + C + D), sp.Integer(c))


# length gadgets -------------------------------------------------------------


def g_line_addition(rng, L):
    A, B, C = L.take(3)
    p, q = rng.randint(2, 20), rng.randint(2, 20)
    cons = [f"Collinear({A}{B}{C})"]
    if rng.random() < 0.5:
        X = L.take(1)[0]
        cons += [_tri_shape(A, B, X), _tri_shape(X, B, C)]
    if rng.random() < 0.5:
        return Piece(cons, [eq(ll(B + C), q)], [f"line_addition(1,{A}{B},{B}{C})"],
                     ll(A + C), sp.Integer(p + q), ll(A + B), sp.Integer(p))
    return Piece(cons, [eq(ll(A + C), p + q)], [f"line_addition(1,{A}{B},{B}{C})"],
                 ll(B + C), sp.Integer(q), ll(A + B), sp.Integer(p))


def g_midpoint(rng, L):
    A, M, B = L.take(3)
    p = rng.randint(2, 15)
    return Piece([f"Collinear({A}{M}{B})"], [f"IsMidpointOfLine({M},{A}{B})"],
                 [f"line_addition(1,{A}{M},{M}{B})"], ll(A + B), sp.Integer(2 * p), ll(A + M), sp.Integer(p))


_TRIPLES = [(3, 4, 5), (5, 12, 13), (6, 8, 10), (8, 15, 17), (9, 12, 15), (7, 24, 25), (20, 21, 29)]


def g_pythagorean(rng, L):
    A, B, C = L.take(3)
    given = rng.random() < 0.6
    cond = [f"PerpendicularBetweenLine({A}{B},{C}{B})"] if given else [eq(ma(A + B + C), 90)]
    calls = [f"right_triangle_judgment_angle(1,{A}{B}{C})", f"right_triangle_property_pythagorean(1,{A}{B}{C})"]
    if rng.random() < 0.7:
        a, b, c = rng.choice(_TRIPLES)
        k = rng.choice([1, 1, 2, 3])
        a, b, c = a * k, b * k, c * k
    else:
        a, b = rng.randint(2, 12), rng.randint(2, 12)
        c = sp.sqrt(a * a + b * b)
    if rng.random() < 0.6:
        return Piece([_tri_shape(A, B, C)], cond + [eq(ll(B + C), b)], calls,
                     ll(A + C), sp.nsimplify(c), ll(A + B), sp.Integer(a))
    return Piece([_tri_shape(A, B, C)], cond + [eq(ll(A + C), c)], calls,
                 ll(B + C), sp.Integer(b), ll(A + B), sp.Integer(a))


def g_isosceles_side(rng, L):
    A, B, C = L.take(3)
    b = rng.randint(20, 85)
    p = rng.randint(2, 20)
    return Piece([_tri_shape(A, B, C)], [eq(ma(A + B + C), b), eq(ma(B + C + A), b)],
                 [f"isosceles_triangle_judgment_angle_equal(1,{A}{B}{C})"],
                 ll(A + C), sp.Integer(p), ll(A + B), sp.Integer(p))


def g_perimeter(rng, L):
    A, B, C = L.take(3)
    while True:
        a, b, c = (rng.randint(3, 20) for _ in range(3))
        if a + b > c and b + c > a and a + c > b:
            break
    return Piece([_tri_shape(A, B, C)], [eq(ll(B + C), b), eq(ll(C + A), c)],
                 [f"triangle_perimeter_formula(1,{A}{B}{C})"],
                 f"PerimeterOfTriangle({A}{B}{C})", sp.Integer(a + b + c), ll(A + B), sp.Integer(a))


def g_quad_perimeter(rng, L):
    A, B, C, D = L.take(4)
    s = [rng.randint(3, 15) for _ in range(4)]
    return Piece([_quad_shape(A, B, C, D)], [eq(ll(B + C), s[1]), eq(ll(C + D), s[2]), eq(ll(D + A), s[3])],
                 [f"quadrilateral_perimeter_formula(1,{A}{B}{C}{D})"],
                 f"PerimeterOfQuadrilateral({A}{B}{C}{D})", sp.Integer(sum(s)), ll(A + B), sp.Integer(s[0]))


def g_radius(rng, L):
    O, A, B = L.take(3)
    r = rng.randint(2, 15)
    return Piece([f"Cocircular({O},{A}{B})", _tri_shape(O, A, B)], [f"IsCentreOfCircle({O},{O})"],
                 [f"radius_of_circle_property_length_equal(1,{O}{A},{O})",
                  f"radius_of_circle_property_length_equal(1,{O}{B},{O})"],
                 ll(O + B), sp.Integer(r), ll(O + A), sp.Integer(r))


def g_diameter_radius(rng, L):
    O, A, B = L.take(3)
    d = rng.randint(2, 30)
    return Piece([f"Cocircular({O},{A}{B})", f"Collinear({A}{O}{B})"],
                 [f"IsCentreOfCircle({O},{O})", f"IsDiameterOfCircle({A}{B},{O})"],
                 [f"diameter_of_circle_property_length_equal(1,{A}{B},{O})",
                  f"circle_property_length_of_radius_and_diameter(1,{O})"],
                 f"RadiusOfCircle({O})", sp.Rational(d, 2), ll(A + B), sp.Integer(d))


def g_circle_measure(rng, L):
    O, A = L.take(2)
    r = rng.randint(1, 12)
    if rng.random() < 0.5:
        return Piece([f"Cocircular({O},{A})"], [f"IsCentreOfCircle({O},{O})"],
                     [f"circle_area_formula(1,{O})"], f"AreaOfCircle({O})", sp.pi * r * r,
                     f"RadiusOfCircle({O})", sp.Integer(r))
    return Piece([f"Cocircular({O},{A})"], [f"IsCentreOfCircle({O},{O})"],
                 [f"circle_perimeter_formula(1,{O})"], f"PerimeterOfCircle({O})", 2 * sp.pi * r,
                 f"RadiusOfCircle({O})", sp.Integer(r))


def g_diameter_pythagorean(rng, L):
    O, A, B, C = L.take(4)
    a, b, c = rng.choice(_TRIPLES)
    return Piece([f"Cocircular({O},{A}{B}{C})", f"Collinear({A}{O}{B})", _shape(A + C, C + B, B + O, O + A)],
                 [f"IsCentreOfCircle({O},{O})", f"IsDiameterOfCircle({A}{B},{O})", eq(ll(C + A), b)],
                 [f"diameter_of_circle_property_right_angle(1,{B}{C}{A},{O})",
                  f"right_triangle_judgment_angle(1,{B}{C}{A})",
                  f"right_triangle_property_pythagorean(1,{B}{C}{A})"],
                 ll(A + B), sp.Integer(c), ll(B + C), sp.Integer(a))


def g_tangent_length(rng, L):
    O, A, P = L.take(3)
    a, b, c = rng.choice(_TRIPLES)
    return Piece([f"Cocircular({O},{A})", _tri_shape(P, A, O)],
                 [f"IsCentreOfCircle({O},{O})", f"IsTangentOfCircle({P}{A},{O})", eq(ll(O + A), a)],
                 [f"tangent_of_circle_property_perpendicular(1,{P}{A},{O},{O})",
                  f"right_triangle_judgment_angle(1,{O}{A}{P})",
                  f"right_triangle_property_pythagorean(1,{O}{A}{P})"],
                 ll(O + P), sp.Integer(c), ll(A + P), sp.Integer(b))


def g_tangent_pair(rng, L):
    O, A, B, P = L.take(4)
    t = rng.randint(2, 20)
    return Piece([f"Cocircular({O},{A}{B})", _quad_shape(P, A, O, B)],
                 [f"IsCentreOfCircle({O},{O})", f"IsTangentOfCircle({P}{A},{O})", f"IsTangentOfCircle({P}{B},{O})"],
                 [f"tangent_of_circle_property_length_equal(1,{P}{A},{P}{B},{O})"],
                 ll(P + B), sp.Integer(t), ll(P + A), sp.Integer(t))


def g_similar_ratio(rng, L):
    A, B, C, D, E, F = L.take(6)
    k = sp.Rational(rng.choice([2, 3, 4, 5]), rng.choice([1, 2, 3]))
    ab, bc, ca = rng.randint(3, 12), rng.randint(3, 12), rng.randint(3, 12)
    sides = {"AB": ab, "BC": bc, "CA": ca}
    var = rng.choice([1, 2, 3])
    first, second = {1: ("AB", "BC"), 2: ("BC", "CA"), 3: ("CA", "AB")}[var]
    big = {"AB": D + E, "BC": E + F, "CA": F + D}
    small = {"AB": A + B, "BC": B + C, "CA": C + A}
    cons = [_tri_shape(A, B, C), _tri_shape(D, E, F)]
    cond = [eq(ll(big[first]), k * sides[first]), eq(ll(small[second]), sides[second])]
    calls = [f"similar_triangle_property_line_ratio({var},{A}{B}{C},{D}{E}{F})"]
    if rng.random() < 0.4:
        b, c = rng.randint(30, 100), rng.randint(20, 60)
        cond += [eq(ma(A + B + C), b), eq(ma(D + E + F), b), eq(ma(B + C + A), c), eq(ma(E + F + D), c)]
        calls.insert(0, f"similar_triangle_judgment_aa(1,{A}{B}{C},{D}{E}{F})")
    else:
        cond.append(f"SimilarBetweenTriangle({A}{B}{C},{D}{E}{F})")
    return Piece(cons, cond, calls, ll(big[second]), k * sides[second], ll(small[first]), sp.Integer(sides[first]))


def g_similar_parallel(rng, L):
    A, D, B, E, C = L.take(5)
    ad = rng.randint(2, 8)
    ab = ad + rng.randint(1, 8)
    de = rng.randint(2, 10)
    return Piece([f"Collinear({A}{D}{B})", f"Collinear({A}{E}{C})", _tri_shape(A, D, E), _quad_shape(D, B, C, E)],
                 [eq(ll(A + B), ab), eq(ll(D + E), de)],
                 [f"parallel_property_corresponding_angle(1,{D}{E},{B}{C},{A})",
                  f"parallel_property_corresponding_angle(1,{E}{D},{C}{B},{A})",
                  f"similar_triangle_judgment_aa(1,{A}{D}{E},{A}{B}{C})",
                  f"similar_triangle_property_line_ratio(1,{A}{D}{E},{A}{B}{C})"],
                 ll(B + C), sp.Rational(de * ab, ad), ll(A + D), sp.Integer(ad),
                 image=[_par(D + E, B + C, rng)])


def g_parallelogram_side(rng, L):
    A, B, C, D = L.take(4)
    p = rng.randint(2, 20)
    var = rng.choice([1, 2])
    src, dst = ((B + A, C + D) if var == 1 else (D + A, B + C))
    return Piece([_quad_shape(A, B, C, D)], [f"Parallelogram({_rot(A + B + C + D, rng)})"],
                 [f"parallelogram_property_opposite_line_equal({var},{A}{B}{C}{D})"],
                 ll(dst), sp.Integer(p), ll(src), sp.Integer(p))


def g_rectangle(rng, L):
    A, B, C, D = L.take(4)
    p, q = rng.randint(2, 15), rng.randint(2, 15)
    cons = [_quad_shape(A, B, C, D)]
    if rng.random() < 0.5:
        return Piece(cons, [f"Rectangle({_rot(A + B + C + D, rng)})"],
                     [f"rectangle_property_diagonal_equal(1,{A}{B}{C}{D})"],
                     ll(B + D), sp.Integer(p), ll(A + C), sp.Integer(p))
    return Piece(cons, [f"Rectangle({_rot(A + B + C + D, rng)})", eq(ll(B + C), q)],
                 [f"rectangle_area_formula(1,{A}{B}{C}{D})"],
                 f"AreaOfQuadrilateral({A}{B}{C}{D})", sp.Integer(p * q), ll(A + B), sp.Integer(p))


def g_rhombus(rng, L):
    A, B, C, D = L.take(4)
    p = rng.randint(2, 20)
    return Piece([_quad_shape(A, B, C, D)], [f"Rhombus({_rot(A + B + C + D, rng)})"],
                 [f"rhombus_property_side_equal(1,{A}{B}{C}{D})"], ll(D + A), sp.Integer(p), ll(A + B), sp.Integer(p))


def g_bisector_ratio(rng, L):
    A, B, C, D = L.take(4)
    while True:
        p, q, r = rng.randint(3, 12), rng.randint(3, 12), rng.randint(2, 8)
        ac = r * (1 + sp.Rational(q, p))
        if abs(p - q) < ac < p + q:
            break
    return Piece([f"Collinear({A}{D}{C})", _tri_shape(A, B, D), _tri_shape(D, B, C)],
                 [f"IsBisectorOfAngle({B}{D},{A}{B}{C})", eq(ll(B + C), q), eq(ll(D + A), r)],
                 [f"bisector_of_angle_property_line_ratio(1,{B}{D},{A}{B}{C})"],
                 ll(C + D), sp.Rational(r * q, p), ll(B + A), sp.Integer(p))


def g_sine(rng, L):
    A, B, C = L.take(3)
    while True:
        b, c = rng.choice(TABLE_ANGLES), rng.choice(TABLE_ANGLES)
        if b + c < 180:
            break
    p = rng.randint(2, 12)
    val = sp.nsimplify(sp.simplify(p * sp.sin(b * DEG) / sp.sin(c * DEG)))
    return Piece([_tri_shape(A, B, C)], [eq(ma(A + B + C), b), eq(ma(B + C + A), c)],
                 [f"sine_theorem(1,{A}{B}{C})"], ll(A + C), val, ll(A + B), sp.Integer(p))


def g_cosine(rng, L):
    A, B, C = L.take(3)
    a = rng.choice([60, 90, 120])
    p, q = rng.randint(2, 10), rng.randint(2, 10)
    val = sp.sqrt(sp.nsimplify(p * p + q * q - 2 * p * q * sp.cos(a * DEG)))
    return Piece([_tri_shape(A, B, C)], [eq(ll(A + C), q), eq(ma(C + A + B), a)],
                 [f"cosine_theorem(1,{A}{B}{C})"], ll(B + C), sp.nsimplify(val), ll(A + B), sp.Integer(p))


def g_area_sine(rng, L):
    A, B, C = L.take(3)
    a = rng.choice(TABLE_ANGLES)
    p, q = rng.randint(2, 12), rng.randint(2, 12)
    val = sp.nsimplify(p * q * sp.sin(a * DEG) / 2)
    return Piece([_tri_shape(A, B, C)], [eq(ll(A + C), q), eq(ma(C + A + B), a)],
                 [f"triangle_area_formula_sine(1,{A}{B}{C})"], f"AreaOfTriangle({A}{B}{C})", val,
                 ll(A + B), sp.Integer(p))


def g_parallelogram_area(rng, L):
    A, B, C, D = L.take(4)
    a = rng.choice((30, 45, 60, 90, 120, 135, 150))
    p, q = rng.randint(2, 12), rng.randint(2, 12)
    val = sp.nsimplify(p * q * sp.sin(a * DEG))
    return Piece([_quad_shape(A, B, C, D)], [f"Parallelogram({_rot(A + B + C + D, rng)})", eq(ll(B + C), q), eq(ma(A + B + C), a)],
                 [f"parallelogram_area_formula_sine(1,{A}{B}{C}{D})"], f"AreaOfQuadrilateral({A}{B}{C}{D})", val,
                 ll(A + B), sp.Integer(p))


def g_inverse_cosine(rng, L):
    """An angle fixed only through its cosine: needs arccos, which the verifier rejects."""
    A, B, C = L.take(3)
    while True:
        p, q, r = rng.randint(3, 12), rng.randint(3, 12), rng.randint(3, 12)
        cosv = sp.Rational(p * p + q * q - r * r, 2 * p * q)
        if abs(cosv) < 1 and cosv not in (0, sp.Rational(1, 2), -sp.Rational(1, 2)):
            break
    return Piece([_tri_shape(A, B, C)], [eq(ll(A + C), q), eq(ll(B + C), r)],
                 [f"cosine_theorem(1,{A}{B}{C})"], ma(C + A + B), 180 * sp.acos(cosv) / sp.pi,
                 ll(A + B), sp.Integer(p))


@dataclass(frozen=True)
class Gadget:
    fn: Callable
    steps: int | tuple[int, ...]
    weight: float
    input: str | None = "any"  # None: cannot take a chained input
    final_only: bool = False


GADGETS: dict[str, Gadget] = {
    "triangle_sum": Gadget(g_triangle_sum, 1, 14),
    "adjacent": Gadget(g_adjacent, 1, 10),
    "line_addition": Gadget(g_line_addition, 1, 10),
    "angle_addition": Gadget(g_angle_addition, 1, 6),
    "pythagorean": Gadget(g_pythagorean, 2, 7),
    "isosceles_angle": Gadget(g_isosceles_angle, (2, 3), 5),
    "alternate": Gadget(g_alternate, 1, 5),
    "corresponding": Gadget(g_corresponding, 1, 4),
    "ipsilateral": Gadget(g_ipsilateral, 1, 3),
    "vertical": Gadget(g_vertical, 1, 3),
    "similar_parallel": Gadget(g_similar_parallel, 4, 3),
    "similar_ratio": Gadget(g_similar_ratio, (1, 2), 3),
    "quad_sum": Gadget(g_quad_sum, 1, 2.5),
    "parallelogram_angle": Gadget(g_parallelogram_angle, (1, 2), 2.5),
    "parallelogram_side": Gadget(g_parallelogram_side, 1, 2),
    "midpoint": Gadget(g_midpoint, 1, 2),
    "isosceles_side": Gadget(g_isosceles_side, 1, 2),
    "arc": Gadget(g_arc, 2, 2),
    "diameter_angle": Gadget(g_diameter_angle, 2, 1.5),
    "tangent_angle": Gadget(g_tangent_angle, 2, 1.5),
    "perimeter": Gadget(g_perimeter, 1, 1.5),
    "sine": Gadget(g_sine, 1, 1.5, final_only=True),
    "cosine": Gadget(g_cosine, 1, 1.2, final_only=True),
    "radius": Gadget(g_radius, 2, 1.2),
    "bisector": Gadget(g_bisector, 1, 1.2),
    "parallel_judgment": Gadget(g_parallel_judgment, 2, 1),
    "similar_angle": Gadget(g_similar_angle, 1, 1),
    "area_sine": Gadget(g_area_sine, 1, 1, final_only=True),
    "diameter_radius": Gadget(g_diameter_radius, 2, 0.8),
    "circle_measure": Gadget(g_circle_measure, 1, 0.8, final_only=True),
    "tangent_length": Gadget(g_tangent_length, 3, 0.6),
    "diameter_pythagorean": Gadget(g_diameter_pythagorean, 3, 0.5),
    "tangent_pair": Gadget(g_tangent_pair, 1, 0.5),
    "perpendicular_extend": Gadget(g_perpendicular_extend, (2, 3), 0.5),
    "parallel_extend": Gadget(g_parallel_extend, 2, 0.4),
    "bisector_ratio": Gadget(g_bisector_ratio, 1, 0.4),
    "equilateral": Gadget(g_equilateral, 1, 0.4, input=None),
    "quad_perimeter": Gadget(g_quad_perimeter, 1, 0.4),
    "rectangle": Gadget(g_rectangle, 1, 0.4),
    "rhombus": Gadget(g_rhombus, 1, 0.25),
    "congruent_angle": Gadget(g_congruent_angle, 2, 0.25),
    "parallelogram_area": Gadget(g_parallelogram_area, 1, 0.25, final_only=True),
    "inverse_cosine": Gadget(g_inverse_cosine, 1, 0.25, final_only=True),
}


# problem assembly -----------------------------------------------------------


def _link(rng: random.Random, term: str, value: sp.Expr, prev: Piece) -> str:
    """State ``term = value`` as an equation in the previous gadget's target."""
    pv = prev.value
    choices = []
    if value == pv:
        choices.append(eq(term, prev.target))
    diff = sp.nsimplify(value - pv)
    if diff.is_Rational:
        if diff > 0:
            choices.append(eq(term, f"Add({prev.target},{num(diff)})"))
        elif diff < 0:
            choices.append(eq(term, f"Sub({prev.target},{num(-diff)})"))
    ratio = sp.nsimplify(value / pv)
    if ratio.is_Rational and ratio != 1 and (ratio.p < 10 and ratio.q < 10):
        choices.append(eq(term, f"Mul({prev.target},{num(ratio)})"))
    return rng.choice(choices) if choices else eq(term, value)


_PHRASE = {
    "MeasureOfAngle": "∠{}",
    "LengthOfLine": "{}",
    "RadiusOfCircle": "the radius of ⊙{}",
    "DiameterOfCircle": "the diameter of ⊙{}",
    "AreaOfTriangle": "the area of △{}",
    "PerimeterOfTriangle": "the perimeter of △{}",
    "AreaOfQuadrilateral": "the area of quadrilateral {}",
    "PerimeterOfQuadrilateral": "the perimeter of quadrilateral {}",
    "AreaOfCircle": "the area of ⊙{}",
    "PerimeterOfCircle": "the circumference of ⊙{}",
}


def _phrase(text: str) -> str:
    t = parse_term(text)
    from geoproof.cdl import Ident, Term, render

    def words(n):
        if isinstance(n, Term) and n.head in _PHRASE and isinstance(n.args[0], Ident):
            return _PHRASE[n.head].format(n.args[0].name)
        if isinstance(n, Term) and n.head in ("Add", "Sub", "Mul"):
            op = {"Add": "+", "Sub": "-", "Mul": "*"}[n.head]
            return op.join(words(a) for a in n.args)
        return render(n)

    if isinstance(t, Term) and t.head == "Equal":
        return f"{words(t.args[0])}={words(t.args[1])}"
    if isinstance(t, Term) and t.head == "ParallelBetweenLine":
        return f"{t.args[0]}∥{t.args[1]}"
    if isinstance(t, Term) and t.head == "PerpendicularBetweenLine":
        return f"{t.args[0]}⊥{t.args[1]}"
    return render(t)


def _describe(conditions: list[str], goal: str) -> str:
    parts = [_phrase(c) for c in conditions]
    target = parse_term(goal).args[0]
    from geoproof.cdl import Ident, Term

    if isinstance(target, Term) and target.head in _PHRASE:
        what = _PHRASE[target.head].format(target.args[0].name)
        if target.head == "LengthOfLine":
            what = f"the length of line {target.args[0].name}"
        elif target.head == "MeasureOfAngle":
            what = f"the measure of {what}"
    elif isinstance(target, Ident):
        what = f"the value of {target.name}"
    else:
        what = str(target)
    lead = "As shown in the diagram, " + ", ".join(parts) + ". " if parts else ""
    return f"{lead}Find {what}."


def _pick(rng: random.Random, names: list[str], budget: int, first: bool) -> str | None:
    options = []
    for n in names:
        g = GADGETS[n]
        steps = g.steps if isinstance(g.steps, tuple) else (g.steps,)
        if min(steps) > budget:
            continue
        if not first and g.input is None:
            continue
        options.append(n)
    if not options:
        return None
    return rng.choices(options, weights=[GADGETS[n].weight for n in options])[0]


def generate_problem(pid: int, level: int, seed: int) -> dict:
    """One problem record with a ground-truth proof of exactly ``level`` steps."""
    rng = random.Random(f"{seed}:{pid}")
    for _ in range(200):
        try:
            record = _try_generate(rng, pid, level)
        except OutOfLetters:
            continue
        if record is not None:
            return record
    raise RuntimeError(f"could not generate a level-{level} problem")


def _try_generate(rng: random.Random, pid: int, level: int) -> dict | None:
    letters = Letters(rng)
    names = list(GADGETS)
    pieces: list[Piece] = []
    remaining = level
    while remaining > 0:
        name = _pick(rng, names, remaining, first=not pieces)
        if name is None:
            return None
        piece = GADGETS[name].fn(rng, letters)
        if piece.steps > remaining or (pieces and piece.input_term is None):
            return None
        remaining -= piece.steps
        # irrational or inverse-trig targets cannot feed a later gadget
        if GADGETS[name].final_only and remaining:
            return None
        pieces.append(piece)
    construction: list[str] = []
    text: list[str] = []
    image: list[str] = []
    proof: list[str] = []
    for i, piece in enumerate(pieces):
        construction += piece.construction
        image += piece.image
        if piece.input_term is not None:
            if i == 0:
                text.append(eq(piece.input_term, piece.input_value))
            else:
                text.append(_link(rng, piece.input_term, piece.input_value, pieces[i - 1]))
        text += piece.conditions
        text += [e for e in piece.extras if rng.random() < 0.3]
        proof += piece.proof
    last = pieces[-1]
    goal = f"Value({last.target})"
    answer = last.value
    if last.value.is_Rational and rng.random() < 0.25:
        a = rng.choice([1, 2, 3])
        b = rng.choice([0, 5, 10, -4])
        x = sp.Rational(last.value - b, a)
        if x > 0:
            coef = "" if a == 1 else f"{a}*"
            rhs = f"{coef}x" + (f"+{b}" if b > 0 else f"-{-b}" if b < 0 else "")
            text.append(f"Equal({last.target},{rhs})")
            goal = "Value(x)"
            answer = x
    # conditions drawn from a figure may be stated as text or read off the diagram
    split_text, split_image = [], list(image)
    for c in text:
        (split_image if c.startswith(("Parallel", "Perpendicular")) and rng.random() < 0.5 else split_text).append(c)
    return {
        "problem_id": pid,
        "problem_level": len(proof),
        "problem_text_en": _describe(split_text + split_image, goal),
        "construction_cdl": construction,
        "text_cdl": split_text,
        "image_cdl": split_image,
        "goal_cdl": goal,
        "problem_answer": num(answer),
        "theorem_seqs": proof,
        "source": "synthetic",
    }


LEVEL_WEIGHTS = {1: 0.2, 2: 0.24, 3: 0.2, 4: 0.15, 5: 0.11, 6: 0.06, 7: 0.04}


def generate_corpus(n: int, seed: int = 0, levels: dict[int, float] | None = None) -> list[dict]:
    """``n`` problem records with ids 1..n; deterministic for a given seed."""
    levels = levels or LEVEL_WEIGHTS
    rng = random.Random(seed)
    keys = sorted(levels)
    out = []
    for pid in range(1, n + 1):
        level = rng.choices(keys, weights=[levels[k] for k in keys])[0]
        out.append(generate_problem(pid, level, seed))
    return out


def corpus_problems(n: int, seed: int = 0) -> list[Problem]:
    return [load_problem(r) for r in generate_corpus(n, seed)]
