//! Figure presets. Each is a config file naming one subcommand; `recipe
//! --show <name>` prints it for editing.

const RECIPES: &[(&str, &str, &str)] = &[
    (
        "fig2",
        "one-spin orbits below, at and above the separatrix",
        r#"subcommand = "classical-orbit"
[classical-orbit]
J = "0.79,1.1504059085,1.76"
t_max = 1000.0
open_t = 100.0
"#,
    ),
    (
        "fig3",
        "lambda_p against J at L = 10 and 18",
        r#"subcommand = "lyapunov-scan-J"
[lyapunov-scan-J]
J = "0.6..2.4:0.05"
L = "10,18"
"#,
    ),
    (
        "fig4a",
        "lambda_p against L at J = 0.79",
        r#"subcommand = "lyapunov-scan-L"
[lyapunov-scan-L]
J = 0.79
L = "4..44"
"#,
    ),
    (
        "fig4b",
        "lambda_p against L at J = 1.76, with the unstable-window fit",
        r#"subcommand = "lyapunov-scan-L"
[lyapunov-scan-L]
J = 1.76
L = "4..44"
"#,
    ),
    (
        "fig4c",
        "lambda_p against L at J = 2.23",
        r#"subcommand = "lyapunov-scan-L"
[lyapunov-scan-L]
J = 2.23
L = "4..44"
"#,
    ),
    (
        "fig5",
        "Lyapunov-vector spectra f(q) for L = 18, 20 and J = 0.79, 1.76",
        r#"subcommand = "lyapunov-scan-J"
[lyapunov-scan-J]
J = "0.79,1.76"
L = "18,20"
"#,
    ),
    (
        "fig7",
        "separatrix cusp of lambda_p at L = 10",
        r#"subcommand = "cusp-scan"
[cusp-scan]
L = 10
decades = "1..6:0.5"
cutoff = 0.01
"#,
    ),
    (
        "fig8",
        "single-observable exponent from an ensemble at L = 100",
        r#"subcommand = "ensemble-otoc"
# dt 0.01 instead of 0.001; the maxima used in the fit do not move at this step.
[ensemble-otoc]
J = 1.76
L = 100
N = 1000
radius = 1e-4
duration = 40.0
dt = 0.01
"#,
    ),
    (
        "fig9",
        "temporal spectrum of the nearly quasiperiodic regime at L = 6",
        r#"subcommand = "temporal-spectrum"
[temporal-spectrum]
J = 1.76
L = 6
start = 300.0
width = 6000.0
taper = 0.1
"#,
    ),
    (
        "fig10",
        "mode intensities and harmonic growth rates at L = 18",
        r#"subcommand = "fourier-modes"
[fourier-modes]
J = 1.76
L = 18
t = 250.0
"#,
    ),
    (
        "fig13",
        "closest approach and period scalings near the separatrix",
        r#"subcommand = "separatrix"
[separatrix]
scaling_decades = "1..6:0.5"
"#,
    ),
    (
        "fig14",
        "level-spacing ratio for S = 1/2 and S = 1",
        r#"subcommand = "quantum-rvalue"
[quantum-rvalue]
systems = "1/2:12..14;1:7..8"
J = 1.76
"#,
    ),
    (
        "fig15",
        "entanglement, overlaps and the scar state for S = 2, L = 6",
        r#"subcommand = "scar-report"
[scar-report]
S = "2"
L = 6
J = 1.76
"#,
    ),
    (
        "fig16",
        "stability certificate for L = 23 at J = 1.76",
        r#"subcommand = "stability-certificate"
[stability-certificate]
J = 1.76
L = 23
TR = "1,2,5,10,20"
M = 1000
"#,
    ),
    (
        "fig17",
        "relaxation from the all-up and random states with the classical imitation (S = 1)",
        r#"subcommand = "quantum-relax"
# Psi_up on L = 10 (even zero-momentum block), Psi_inf on L = 10 in the full basis.
[quantum-relax]
S = "1"
L = 10
J = "1.76"
t_max = 10.0
inf_length = 10
imitation = 10000
"#,
    ),
    (
        "fig20",
        "relaxation across J for S = 3/2 and the baseline crossover",
        r#"subcommand = "quantum-relax"
# L = 7 instead of 8: the even block of L = 8 takes minutes per coupling on one core.
[quantum-relax]
S = "3/2"
L = 7
J = "0.7,0.8,0.9,1.0,1.05,1.1,1.15,1.2,1.25,1.3,1.4,1.5,1.76"
t_max = 10.0
inf_length = 0
"#,
    ),
    (
        "fig21",
        "participation ratio of the all-up state against J",
        r#"subcommand = "pr-scan"
# Desk-scale sizes; acceptance uses S = 3/2 L = 8 and S = 2 L = 7 on a coarse grid.
[pr-scan]
systems = "1/2:12;3/2:7;2:6"
J = "0.8..1.6:0.05"
"#,
    ),
];

pub fn list() -> impl Iterator<Item = (&'static str, &'static str)> {
    RECIPES.iter().map(|(n, a, _)| (*n, *a))
}

pub fn preset(name: &str) -> Option<&'static str> {
    RECIPES.iter().find(|(n, _, _)| *n == name).map(|(_, _, t)| *t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FileConfig;

    #[test]
    fn every_preset_parses_and_names_its_table() {
        for (name, _, text) in RECIPES {
            let f = FileConfig::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            let sub = f.global["subcommand"].as_str().unwrap();
            assert!(f.tables.contains_key(sub), "{name}");
        }
    }
}
