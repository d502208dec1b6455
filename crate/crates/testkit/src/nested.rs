//! Hand-written functions with nested conditions, each paired with a deeply
//! nested target line that is feasible to reach.

pub struct NestedCase {
    pub function: &'static str,
    pub source: &'static str,
    pub target_line: u32,
    /// Goals no input can cover: `(line, None)` for a line and
    /// `(condition line, Some(outcome))` for a branch outcome.
    pub infeasible: &'static [(u32, Option<bool>)],
}

pub fn cases() -> Vec<NestedCase> {
    vec![
        NestedCase {
            function: "two",
            source: "fn two(x: int, y: int) -> int {
    if (x > 10) {
        if (y == x + 3) {
            return 1;
        }
    }
    return 0;
}",
            target_line: 4,
            infeasible: &[],
        },
        NestedCase {
            function: "three",
            source: "fn three(a: int, b: int, c: int) -> int {
    let r: int = 0;
    if (a < b) {
        r = 1;
        if (b < c) {
            r = 2;
            if (c - a == 17) {
                r = 3;
            }
        }
    }
    return r;
}",
            target_line: 8,
            infeasible: &[],
        },
        NestedCase {
            function: "four",
            source: "fn four(a: int, b: int) -> int {
    if (a > 0) {
        if (b > 0) {
            if (a + b > 50) {
                if (a % 7 == 3) {
                    return a * b;
                }
            }
        }
    }
    return 0;
}",
            target_line: 6,
            infeasible: &[],
        },
        NestedCase {
            function: "flags",
            source: "fn flags(p: bool, q: bool, n: int) -> int {
    if (p) {
        if (!q) {
            if (n == -42) {
                return 7;
            }
        }
    }
    return 0;
}",
            target_line: 5,
            infeasible: &[],
        },
        NestedCase {
            function: "arr",
            source: "fn arr(xs: int[]) -> int {
    if (len(xs) > 2) {
        if (xs[0] == 5) {
            if (xs[2] > xs[1]) {
                return 1;
            }
        }
    }
    return 0;
}",
            target_line: 5,
            infeasible: &[],
        },
        NestedCase {
            function: "loopy",
            source: "fn loopy(n: int, k: int) -> int {
    let s: int = 0;
    let i: int = 0;
    while (i < n && i < 20) {
        if (i == k) {
            if (k > 3) {
                s = s + 100;
            }
        }
        s = s + i;
        i = i + 1;
    }
    return s;
}",
            target_line: 7,
            infeasible: &[],
        },
        NestedCase {
            function: "elsey",
            source: "fn elsey(x: int, y: int) -> int {
    if (x == 0) {
        return 0;
    } else {
        if (y > x) {
            if (y - x < 3) {
                return 2;
            } else {
                return 3;
            }
        }
    }
    return 1;
}",
            target_line: 7,
            infeasible: &[],
        },
        NestedCase {
            function: "rec",
            source: "record P { x: int; y: int; }
fn rec(p: P, d: int) -> int {
    if (p.x > d) {
        if (p.y < 0) {
            if (p.x + p.y == 0) {
                return 1;
            }
        }
    }
    return 0;
}",
            target_line: 6,
            infeasible: &[],
        },
        NestedCase {
            function: "dead",
            source: "fn dead(x: int) -> int {
    if (x > 5) {
        if (x < 3) {
            return 9;
        }
        if (x != 6) {
            return 2;
        }
    }
    return 0;
}",
            target_line: 7,
            infeasible: &[(4, None), (3, Some(true))],
        },
        NestedCase {
            function: "both",
            source: "fn both(a: int, b: int) -> int {
    if (a >= 100 || b <= -100) {
        if (a < 120 && b > -120) {
            if (a != b) {
                return a - b;
            }
        }
    }
    return 0;
}",
            target_line: 5,
            infeasible: &[],
        },
    ]
}
