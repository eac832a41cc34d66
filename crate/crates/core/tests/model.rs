use proptest::prelude::*;
use sirlab_core::model::*;

fn law(density: DensityFamily, sigma: f64) -> InitialLaw {
    InitialLaw { density, region: Region::All, p_infect: 0.1, sigma }
}

fn base(density: DensityFamily, sigma: f64) -> ModelSpec {
    ModelSpec::new(
        1,
        CompartmentCoefficients::uniform(CoefficientField::constant(vec![0.1], 0.4)),
        ContactKernel::new(BetaField::Constant { value: 1.5 }, KernelShape::FlatTop { inner: 0.2, radius: 0.5, order: 4 }),
        0.3,
        law(density, sigma),
    )
    .unwrap()
}

#[test]
fn gaussian_population_passes_every_assumption() {
    let spec = base(DensityFamily::Gaussian { mean: vec![0.0], std: 1.0 }, 1.0);
    let report = validate_model(&spec);
    assert!(report.all_passed(), "{:?}", report.failures().collect::<Vec<_>>());
}

#[test]
fn heavy_tails_fail_the_moment_condition() {
    // Student t with 2 degrees of freedom has no moment of order 2.
    let spec = base(DensityFamily::StudentT { center: vec![0.0], scale: 1.0, dof: 2.0 }, 1.0);
    let report = validate_model(&spec);
    assert!(!report.find("moment condition").unwrap().passed);
    assert!(report.into_result().is_err());
}

#[test]
fn other_normalizations_are_rejected() {
    let mut spec = base(DensityFamily::Gaussian { mean: vec![0.0], std: 1.0 }, 1.0);
    spec.gamma = 0.5;
    assert!(spec.check().unwrap_err().to_string().contains("gamma"));
    assert!(!validate_model(&spec).find("gamma").unwrap().passed);
}

#[test]
fn weight_exponent_must_exceed_half_dimension() {
    let spec = ModelSpec::new(
        2,
        CompartmentCoefficients::uniform(CoefficientField::constant(vec![0.0, 0.0], 0.4)),
        ContactKernel::zero(),
        0.3,
        law(DensityFamily::Gaussian { mean: vec![0.0, 0.0], std: 1.0 }, 0.8),
    );
    assert!(spec.is_err() || !validate_model(&spec.unwrap()).all_passed());
}

#[test]
fn degenerate_diffusion_fails_ellipticity() {
    let mut spec = base(DensityFamily::Gaussian { mean: vec![0.0], std: 1.0 }, 1.0);
    spec.coefficients.i = CoefficientField::constant(vec![0.0], 0.0);
    let report = validate_model(&spec);
    assert!(report.failures().any(|c| c.name.starts_with("ellipticity")));
}

#[test]
fn generator_of_quadratic() {
    // Q x^2 = 2 m x + theta^2 for constant coefficients.
    let coeff = CoefficientField::constant(vec![0.1], 0.4);
    let phi = Polynomial::new(1, vec![(1.0, vec![2])]);
    for x in [-1.0, 0.0, 2.5] {
        assert!((generator_apply(&coeff, &phi, &[x]) - (0.2 * x + 0.16)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_bounded_and_compactly_supported(x in -2.0f64..2.0, y in -2.0f64..2.0, beta in 0.0f64..5.0) {
        let k = ContactKernel::new(BetaField::Constant { value: beta }, KernelShape::PolyBump { radius: 0.7, power: 6 });
        let v = k.eval(&[x], &[y]);
        prop_assert!(v >= 0.0 && v <= k.sup_norm() + 1e-12);
        if (x - y).abs() >= 0.7 {
            prop_assert_eq!(v, 0.0);
        }
        prop_assert_eq!(v, k.eval(&[y], &[x]));
    }

    #[test]
    fn generator_matches_finite_differences(m in -1.0f64..1.0, theta in 0.0f64..1.5, x in -2.0f64..2.0) {
        let coeff = CoefficientField::constant(vec![m], theta);
        let phi = Polynomial::new(1, vec![(1.0, vec![3]), (-0.5, vec![1])]);
        let h = 1e-4;
        let f = |y: f64| phi.value(&[y]);
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        let fd = m * d1 + 0.5 * theta * theta * d2;
        prop_assert!((generator_apply(&coeff, &phi, &[x]) - fd).abs() < 1e-5);
    }
}
