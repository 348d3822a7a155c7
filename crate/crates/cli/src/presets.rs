//! Built-in experiments, stored as ordinary config text.

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "bernoulli-rademacher",
        description: "i.i.d. fair coin with r = +-1: sigma^2 = 1 by every route; exercises the backward-martingale CLT (thm2), \
                      the forward CLT (thm4/thm5) and the Monte-Carlo verdict",
        config: "\
[system]
preset = bernoulli-rademacher
sidedness = one_sided

[matrix]
0.5, 0.5
0.5, 0.5

[observable]
preset = rademacher

[run]
kind = all
n_grid = 10, 100, 1000, 10000
samples = 4000
seed = 7
",
    },
    Preset {
        name: "two-state-gap",
        description: "P = [[0.9,0.1],[0.2,0.8]], centered indicator of state 0: sigma^2 = 34/27 with spectral gap 0.3; \
                      exercises thm2 (Gordin decomposition), thm3, thm4/thm5 and the remainder term",
        config: "\
[system]
preset = two-state-gap
sidedness = one_sided

[matrix]
0.9, 0.1
0.2, 0.8

[observable]
preset = centered-indicator

[run]
kind = all
n_grid = 10, 100, 1000, 10000
samples = 4000
seed = 7
",
    },
    Preset {
        name: "coboundary",
        description: "fair coin with f = r - Ur: Birkhoff sums telescope and sigma^2 = 0; exercises the degenerate case of thm2",
        config: "\
[system]
preset = coboundary
sidedness = one_sided

[matrix]
0.5, 0.5
0.5, 0.5

[observable]
preset = coboundary

[run]
kind = all
n_grid = 10, 100, 1000, 10000
samples = 4000
seed = 7
",
    },
    Preset {
        name: "period2-indicator",
        description: "deterministic flip chain [[0,1],[1,0]]: ergodic but not mixing, autocovariances alternate; \
                      negative control where the thm2 and thm5 checkers must fail",
        config: "\
[system]
preset = period2-indicator
sidedness = one_sided

[matrix]
0, 1
1, 0

[observable]
preset = centered-indicator

[run]
kind = conditions
n_grid = 10, 100, 1000
seed = 7
",
    },
    Preset {
        name: "doubling-map-note",
        description: "x -> 2x mod 1 with Lebesgue measure, realized through its binary digits as the one-sided fair-coin \
                      shift; r(x) = +1 on [0,1/2), -1 on [1/2,1); same checks as bernoulli-rademacher (thm2, thm4/thm5)",
        config: "\
# The doubling map on [0,1) is measure-isomorphic to the one-sided
# Bernoulli(1/2, 1/2) shift through binary expansion, with the shift acting
# as x -> 2x mod 1. The first binary digit w_0 decides r.
[system]
preset = doubling-map-note
sidedness = one_sided

[matrix]
0.5, 0.5
0.5, 0.5

[observable]
preset = rademacher

[run]
kind = all
n_grid = 10, 100, 1000, 10000
samples = 4000
seed = 7
",
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
