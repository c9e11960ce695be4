//! Named experiment presets: the two benchmark problems in their standard
//! configurations plus the stability and covariance diagnostics.

use crate::config::*;

pub const PRESET_NAMES: [(&str, &str); 7] = [
    (
        "example1_pxh",
        "plane-stress bending, uniform random modulus: hybrid element, degree sweep 0/1/2",
    ),
    (
        "example1_pcxh",
        "plane-stress bending: Hermite-chaos comparison, degrees 4/6/8",
    ),
    (
        "example2_pxh",
        "plane-strain bending, modulus 1+y1^2: hybrid Galerkin, degrees 0 and 2, nu sweep",
    ),
    (
        "example2_locking",
        "plane-strain bending: bilinear displacement element, nu sweep (locking study)",
    ),
    (
        "example2_persample",
        "plane-strain bending: per-sample (collocation) hybrid reference, nu sweep",
    ),
    (
        "stability_sweep",
        "kernel-coercivity and inf-sup constants across a Lamé-parameter sweep",
    ),
    (
        "kl_diagnostics",
        "exponential-kernel eigenpairs, trace and truncation diagnostics",
    ),
];

fn strip_domain() -> DomainConfig {
    DomainConfig {
        x: [0.0, 10.0],
        y: [-1.0, 1.0],
    }
}

fn coarse_grids() -> MeshConfig {
    MeshConfig::Rectangular {
        grids: vec![[5, 1], [10, 2], [20, 4], [40, 8]],
    }
}

fn fine_grids() -> MeshConfig {
    MeshConfig::Rectangular {
        grids: vec![[10, 2], [20, 4], [40, 8], [80, 16]],
    }
}

fn uniform_modulus_field() -> FieldConfig {
    FieldConfig::Explicit {
        variables: vec![DistConfig::Uniform {
            range: [500.0, 1500.0],
        }],
        young: "y1".into(),
        young_bounds: [500.0, 1500.0],
    }
}

fn squared_normal_field() -> FieldConfig {
    FieldConfig::Explicit {
        variables: vec![DistConfig::Normal],
        young: "1+y1^2".into(),
        young_bounds: [1.0, 1.0e9],
    }
}

fn bending_loads() -> LoadsConfig {
    LoadsConfig {
        f: None,
        g: TractionConfig {
            right: Some(["-2*E*x2".into(), "0".into()]),
            top: None,
            bottom: None,
            left: None,
        },
    }
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let cfg = match name {
        "example1_pxh" => ExperimentConfig::ErrorTable(ErrorTableConfig {
            domain: strip_domain(),
            mesh: coarse_grids(),
            material: MaterialConfig {
                mode: ModeConfig::PlaneStress,
                nu: vec![0.25],
            },
            field: uniform_modulus_field(),
            loads: bending_loads(),
            exact: Some(ExactConfig::Preset {
                preset: ExactPreset::BendingPlaneStress,
            }),
            basis: Some(BasisConfig::PVersion {
                sweep: vec![vec![0], vec![1], vec![2]],
            }),
            scheme: Scheme::PsHybrid,
            method: Method::Galerkin,
            recovery: Recovery::Galerkin,
            quadrature: QuadratureConfig::default(),
            dirichlet: DirichletConfig::Exact,
            output: OutputConfig::default(),
        }),
        "example1_pcxh" => ExperimentConfig::ErrorTable(ErrorTableConfig {
            domain: strip_domain(),
            mesh: coarse_grids(),
            material: MaterialConfig {
                mode: ModeConfig::PlaneStress,
                nu: vec![0.25],
            },
            field: uniform_modulus_field(),
            loads: bending_loads(),
            exact: Some(ExactConfig::Preset {
                preset: ExactPreset::BendingPlaneStress,
            }),
            basis: Some(BasisConfig::Gpc {
                sweep: vec![vec![4], vec![6], vec![8]],
            }),
            scheme: Scheme::PsHybrid,
            method: Method::Galerkin,
            recovery: Recovery::Galerkin,
            quadrature: QuadratureConfig {
                stochastic_margin: 12,
                ..QuadratureConfig::default()
            },
            dirichlet: DirichletConfig::Exact,
            output: OutputConfig::default(),
        }),
        "example2_pxh" => ExperimentConfig::ErrorTable(ErrorTableConfig {
            domain: strip_domain(),
            mesh: fine_grids(),
            material: MaterialConfig {
                mode: ModeConfig::PlaneStrain,
                nu: vec![0.25, 0.49, 0.499, 0.4999],
            },
            field: squared_normal_field(),
            loads: bending_loads(),
            exact: Some(ExactConfig::Preset {
                preset: ExactPreset::BendingPlaneStrain,
            }),
            basis: Some(BasisConfig::PVersion {
                sweep: vec![vec![0], vec![2]],
            }),
            scheme: Scheme::PsHybrid,
            method: Method::Galerkin,
            recovery: Recovery::Galerkin,
            quadrature: QuadratureConfig {
                stochastic_margin: 12,
                ..QuadratureConfig::default()
            },
            dirichlet: DirichletConfig::Exact,
            output: OutputConfig::default(),
        }),
        "example2_locking" => ExperimentConfig::ErrorTable(ErrorTableConfig {
            domain: strip_domain(),
            mesh: fine_grids(),
            material: MaterialConfig {
                mode: ModeConfig::PlaneStrain,
                nu: vec![0.25, 0.49, 0.499, 0.4999],
            },
            field: squared_normal_field(),
            loads: bending_loads(),
            exact: Some(ExactConfig::Preset {
                preset: ExactPreset::BendingPlaneStrain,
            }),
            basis: Some(BasisConfig::PVersion {
                sweep: vec![vec![0]],
            }),
            scheme: Scheme::Bilinear,
            method: Method::Galerkin,
            recovery: Recovery::Galerkin,
            quadrature: QuadratureConfig {
                stochastic_margin: 12,
                ..QuadratureConfig::default()
            },
            dirichlet: DirichletConfig::Exact,
            output: OutputConfig::default(),
        }),
        "example2_persample" => ExperimentConfig::ErrorTable(ErrorTableConfig {
            domain: strip_domain(),
            mesh: fine_grids(),
            material: MaterialConfig {
                mode: ModeConfig::PlaneStrain,
                nu: vec![0.25, 0.49, 0.499, 0.4999],
            },
            field: squared_normal_field(),
            loads: bending_loads(),
            exact: Some(ExactConfig::Preset {
                preset: ExactPreset::BendingPlaneStrain,
            }),
            basis: None,
            scheme: Scheme::PsHybrid,
            method: Method::PerSample,
            recovery: Recovery::PerSample,
            quadrature: QuadratureConfig::default(),
            dirichlet: DirichletConfig::Exact,
            output: OutputConfig::default(),
        }),
        "stability_sweep" => ExperimentConfig::Stability(StabilityConfig {
            domain: DomainConfig {
                x: [0.0, 1.0],
                y: [0.0, 1.0],
            },
            mesh: [4, 4],
            lambdas: vec![1.0, 1e2, 1e4, 1e6],
            field: FieldConfig::Explicit {
                variables: vec![DistConfig::Uniform { range: [0.5, 1.5] }],
                young: "y1".into(),
                young_bounds: [0.5, 1.5],
            },
            basis: BasisConfig::PVersion {
                sweep: vec![vec![2]],
            },
            output: OutputConfig::default(),
        }),
        "kl_diagnostics" => ExperimentConfig::KlDiagnostics(KlDiagnosticsConfig {
            kernel: KernelConfig::Exponential {
                variance: 1.0,
                length: 1.0,
            },
            interval: [0.0, 1.0],
            n_modes: 12,
            n_quad: 200,
            truncation_levels: vec![0, 1, 2, 4, 8, 12],
            output: OutputConfig::default(),
        }),
        _ => return None,
    };
    Some(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        assert_eq!(PRESET_NAMES.len(), 7);
        for (name, _) in PRESET_NAMES {
            let cfg = preset(name).unwrap_or_else(|| panic!("missing preset {name}"));
            cfg.validate()
                .unwrap_or_else(|e| panic!("preset {name} invalid: {e}"));
            // round-trips through the schema (strict keys)
            let json = serde_json::to_string(&cfg).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
            back.validate().unwrap();
        }
        assert!(preset("nonexistent").is_none());
    }
}
