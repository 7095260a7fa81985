//! Builtin scenarios, each stored as the config text that defines it.

use subcurv::smp::ComparisonScenario;

use crate::config::{Config, ConfigError};

pub struct BuiltinScenario {
    pub name: &'static str,
    pub description: &'static str,
    pub config: &'static str,
}

pub const BUILTINS: &[BuiltinScenario] = &[
    BuiltinScenario {
        name: "h1-counterexample",
        description: "H_F-minimal pair in the plane touching along x2 = 0 without coinciding (m = 2)",
        config: r#"[structure]
kind = graph_F
m = 2
F = "-x2", "x1"

[scenario]
name = h1-counterexample
description = "H_F-minimal pair in the plane touching along x2 = 0 without coinciding (m = 2)"
operator = graph_HF
u = "x1*x2 + x2^2"
v = "x1*x2"
box = 0.5:1.5, -0.25:0.25
grid = 65
"#,
    },
    BuiltinScenario {
        name: "translate-coincide",
        description: "l_a-graph compared with its own translate (a = 0) in H_1",
        config: r#"[structure]
kind = heisenberg
n = 1

[scenario]
name = translate-coincide
description = "l_a-graph compared with its own translate (a = 0) in H_1"
operator = la_graph
u = "tau + eta2^2/2"
v = "tau + eta2^2/2 + 0"
box = 0.2:1.2, -0.5:0.5
grid = 65
"#,
    },
    BuiltinScenario {
        name: "cylinder-sphere-paraboloid",
        description: "Heisenberg sphere cap against a tangent paraboloid in the cylinder over H_2",
        config: r#"[structure]
kind = cylinder
n = 2

[scenario]
name = cylinder-sphere-paraboloid
description = "Heisenberg sphere cap against a tangent paraboloid in the cylinder over H_2"
operator = radial_cylinder
u = "sqrt(1 - (3/5)^4)/2 - (9/25)/(2*sqrt(1 - (3/5)^4))*(r^2 - 9/25)"
v = "sqrt(1 - r^4)/2"
box = 0.3:0.9
grid = 65
"#,
    },
    BuiltinScenario {
        name: "hyperplane-z",
        description: "horizontal plane z = 0 in H_1 against itself; isolated singular point at the origin",
        config: r#"[structure]
kind = heisenberg
n = 1

[scenario]
name = hyperplane-z
description = "horizontal plane z = 0 in H_1 against itself; isolated singular point at the origin"
operator = generic
p = 0
u = "0"
v = "0"
box = -1:1, -1:1
grid = 65
"#,
    },
    BuiltinScenario {
        name: "vertical-hyperplane",
        description: "vertical hyperplane x1 = 1/2 in H_2 as an l_a-graph; no singular points",
        config: r#"[structure]
kind = heisenberg
n = 2

[scenario]
name = vertical-hyperplane
description = "vertical hyperplane x1 = 1/2 in H_2 as an l_a-graph; no singular points"
operator = la_graph
u = "1/2"
v = "1/2"
box = -1:1, -1:1, -1:1, -1:1
grid = 9
"#,
    },
];

pub fn builtin(name: &str) -> Option<&'static BuiltinScenario> {
    BUILTINS.iter().find(|b| b.name == name)
}

impl BuiltinScenario {
    pub fn scenario(&self) -> Result<ComparisonScenario, ConfigError> {
        Config::parse(self.config)?.scenario.ok_or_else(|| ConfigError::new("builtin has no [scenario]"))
    }
}
