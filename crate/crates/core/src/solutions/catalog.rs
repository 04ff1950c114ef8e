use serde::Serialize;
use serde_json::{json, Value};

use super::SolutionFamily;
use crate::error::{Error, Result};

/// One built-in family with an example parameter object.
#[derive(Clone, Debug, Serialize)]
pub struct FamilyEntry {
    pub tag: &'static str,
    pub theorem: &'static str,
    pub case: &'static str,
    pub summary: &'static str,
    pub parameters: Value,
    pub example: Value,
}

fn coord(i: usize) -> Value {
    json!({"op": "coord", "index": i})
}

pub fn list_families() -> Vec<FamilyEntry> {
    let t1 = |case: &'static str| FamilyEntry {
        tag: if case == "a" { "theorem1/a" } else { "theorem1/b" },
        theorem: "theorem 1",
        case,
        summary: "varphi quadratic with coefficients a1 on D1 and a2 on D2; diagonal T = f1 on D1, f2 on D2",
        parameters: json!({"p1": ">= 2", "p2": ">= 2", "a1": "real", "a2": "real", "b": "n reals", "c": "real", "ambient": "euclidean | hyperbolic-half-space"}),
        example: json!({"family": "theorem1", "case": case, "p1": 2, "p2": 2, "a1": 0.5, "a2": 0.5, "b": [0.1, -0.2, 0.3, 0.0], "c": -1.0}),
    };
    let t2 = |case: &'static str| FamilyEntry {
        tag: if case == "a" { "theorem2/a" } else { "theorem2/b" },
        theorem: "theorem 2",
        case,
        summary: "varphi = exp U(x_k); diagonal T depending on x_k",
        parameters: json!({"p1": ">= 3", "p2": ">= 3", "k": "D1 index (0-based)", "u": "expression in x_k"}),
        example: json!({"family": "theorem2", "case": case, "p1": 3, "p2": 3, "k": 0, "u": {"op": "sin", "arg": coord(0)}}),
    };
    let t3 = |case: &'static str| FamilyEntry {
        tag: if case == "a" { "theorem3/a" } else { "theorem3/b" },
        theorem: "theorem 3",
        case,
        summary: "varphi = v(x_k) + w(x_delta); diagonal T depending on x_k and x_delta",
        parameters: json!({"p1": ">= 3", "p2": ">= 3", "k": "D1 index", "delta": "D2 index", "v": "expression in x_k", "w": "expression in x_delta"}),
        example: json!({"family": "theorem3", "case": case, "p1": 3, "p2": 3, "k": 0, "delta": 3,
            "v": {"op": "add", "args": [{"op": "const", "value": 2.0}, {"op": "sin", "arg": coord(0)}]},
            "w": {"op": "mul", "args": [{"op": "const", "value": 0.5}, {"op": "cos", "arg": coord(3)}]}}),
    };
    vec![
        t1("a"),
        t1("b"),
        t2("a"),
        t2("b"),
        t3("a"),
        t3("b"),
        FamilyEntry {
            tag: "theorem4-i",
            theorem: "theorem 4 (i)",
            case: "a",
            summary: "varphi(x_0, x_1) given; f_01 = p2 varphi_01 / varphi is the only off-diagonal entry",
            parameters: json!({"p1": ">= 3", "p2": ">= 3", "varphi": "expression in x_0, x_1"}),
            example: json!({"family": "theorem4-i", "p1": 3, "p2": 3,
                "varphi": {"op": "exp", "arg": {"op": "add", "args": [coord(0), coord(1)]}}}),
        },
        FamilyEntry {
            tag: "theorem4-ii",
            theorem: "theorem 4 (ii)",
            case: "a",
            summary: "varphi = a e^S + b e^-S (epsilon = +1) or a cos S + b sin S (epsilon = -1), S = sum U_j(x_j), j < p",
            parameters: json!({"p1": ">= 3", "p2": ">= 3", "p": "in [3, p1]", "epsilon": "+1 | -1", "a": "real", "b": "real", "u": "p expressions, U_j in x_j"}),
            example: json!({"family": "theorem4-ii", "p1": 3, "p2": 3, "p": 3, "epsilon": 1, "a": 1.0, "b": 0.0,
                "u": [coord(0), coord(1), coord(2)]}),
        },
    ]
}

pub fn family_by_tag(tag: &str) -> Result<FamilyEntry> {
    list_families()
        .into_iter()
        .find(|e| e.tag == tag)
        .ok_or_else(|| Error::NotFound(format!("no family with tag {tag:?}")))
}

impl FamilyEntry {
    pub fn example_family(&self) -> Result<SolutionFamily> {
        serde_json::from_value(self.example.clone()).map_err(|e| Error::Parse {
            pointer: "/".into(),
            message: e.to_string(),
        })
    }
}
