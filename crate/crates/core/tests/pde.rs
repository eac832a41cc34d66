use proptest::prelude::*;
use sirlab_core::model::*;
use sirlab_core::pde::*;

fn model(theta: f64, drift: f64, kernel: ContactKernel, alpha: f64, p: f64, density: DensityFamily) -> ModelSpec {
    ModelSpec::new(
        1,
        CompartmentCoefficients::uniform(CoefficientField::constant(vec![drift], theta)),
        kernel,
        alpha,
        InitialLaw { density, region: Region::All, p_infect: p, sigma: 1.0 },
    )
    .unwrap()
}

fn gaussian(std: f64) -> DensityFamily {
    DensityFamily::Gaussian { mean: vec![0.0], std }
}

fn moments(f: &[f64], grid: &Grid) -> (f64, f64, f64) {
    let x = grid.coords();
    let m0 = grid.integrate(f);
    let m1 = grid.integrate(&f.iter().zip(&x).map(|(a, b)| a * b).collect::<Vec<_>>()) / m0;
    let m2 = grid.integrate(&f.iter().zip(&x).map(|(a, b)| a * b * b).collect::<Vec<_>>()) / m0;
    (m0, m1, m2 - m1 * m1)
}

#[test]
fn pure_transport_moments() {
    let (theta, m, t) = (0.4, 0.25, 1.0);
    let spec = model(theta, m, ContactKernel::zero(), 0.0, 0.0, gaussian(0.5));
    let grid = Grid::new(vec![-6.0], vec![6.0], 0.02).unwrap();
    let series = solve(&spec, &grid, 0.001, t).unwrap();
    let (m0a, m1a, va) = moments(&series[0].s, &grid);
    let (m0b, m1b, vb) = moments(&series.last().unwrap().s, &grid);
    assert!((m0b - m0a).abs() < 1e-10);
    assert!((m1b - m1a - m * t).abs() < 2e-3, "mean shift {}", m1b - m1a);
    // The upwind flux adds O(h |m|) numerical diffusion on top of theta^2 t.
    assert!((vb - va - theta * theta * t).abs() < 0.02 * m * t + 1e-3, "variance growth {}", vb - va);
}

#[test]
fn homogeneous_contacts_reduce_to_the_ode() {
    let kernel = ContactKernel::new(BetaField::Constant { value: 0.5 }, KernelShape::FlatTop { inner: 5.0, radius: 6.0, order: 4 });
    let spec = model(0.05, 0.0, kernel, 0.3, 0.2, DensityFamily::Uniform { lo: vec![0.0], hi: vec![1.0] });
    let grid = Grid::new(vec![-20.0], vec![21.0], 0.05).unwrap();
    let series = solve_with_stride(&spec, &grid, 0.01, 5.0, 100).unwrap();
    let ode = sir_ode_reduce(0.5, 0.3, 0.8, 0.2, 5.0, 1e-3).unwrap();
    for f in &series {
        let m = f.masses(&grid);
        let o = ode.at(f.time);
        for a in 0..3 {
            assert!((m[a] - o[a]).abs() < 2e-3, "t = {}: {:?} vs {:?}", f.time, m, o);
        }
    }
}

#[test]
fn masses_respect_the_l1_bounds() {
    let kernel = ContactKernel::new(BetaField::Constant { value: 4.0 }, KernelShape::PolyBump { radius: 0.5, power: 6 });
    let spec = model(0.3, 0.0, kernel, 0.5, 0.3, gaussian(1.0));
    let grid = Grid::new(vec![-10.0], vec![10.0], 0.05).unwrap();
    let series = solve(&spec, &grid, 0.005, 2.0).unwrap();
    let checks = l1_bounds_check(&series, &grid, spec.kernel.sup_norm(), spec.alpha, 1e-3);
    assert!(checks.iter().all(|c| c.passed));
    for f in &series {
        assert!(f.min_value() >= 0.0);
        assert!((f.accounted_mass(&grid) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn picard_agrees_with_the_split_solver() {
    let kernel = ContactKernel::new(BetaField::Constant { value: 3.0 }, KernelShape::PolyBump { radius: 0.5, power: 6 });
    let spec = model(0.3, 0.0, kernel, 0.4, 0.3, gaussian(1.0));
    let grid = Grid::new(vec![-10.0], vec![10.0], 0.05).unwrap();
    let dt = 0.005;
    let direct = solve(&spec, &grid, dt, 1.0).unwrap();
    let pic = picard_solve(&spec, &grid, 1.0, &PicardConfig { max_iters: 40, tol_l1: 1e-9, dt, relaxation: 1.0 }).unwrap();
    assert!(sup_l1_distance(&pic.series, &direct, &grid) < 1e-6);
    assert!(pic.gaps.windows(2).skip(2).all(|w| w[1] <= 0.8 * w[0] || w[1] < 1e-12));
}

#[test]
fn unstable_step_is_rejected() {
    let spec = model(1.0, 0.0, ContactKernel::zero(), 0.0, 0.0, gaussian(1.0));
    let grid = Grid::new(vec![-8.0], vec![8.0], 0.01).unwrap();
    assert!(solve(&spec, &grid, 0.01, 0.1).is_err());
}

#[test]
fn ode_conserves_total() {
    let s = sir_ode_reduce(2.0, 0.4, 0.9, 0.1, 10.0, 0.01).unwrap();
    for k in 0..s.times.len() {
        assert!((s.s[k] + s.i[k] + s.r[k] - 1.0).abs() < 1e-12);
    }
    assert!(sir_ode_reduce(1.0, 0.1, 0.8, 0.5, 1.0, 0.01).is_err());
}

#[test]
fn semigroup_mass_is_nonincreasing_for_constant_coefficients() {
    let coeff = CoefficientField::constant(vec![0.2], 0.5);
    let grid = Grid::new(vec![-5.0], vec![5.0], 0.05).unwrap();
    let m = semigroup_mass_check(&coeff, 1.0, &grid);
    assert!(m.max_mass.iter().all(|v| *v <= 1.0 + 1e-12));
    assert!(m.envelope_rate.abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn backward_operator_is_the_transpose(
        drift in -1.0f64..1.0,
        theta in 0.05f64..1.0,
        f in prop::collection::vec(0.0f64..1.0, 60),
        u in prop::collection::vec(-1.0f64..1.0, 60),
    ) {
        let grid = Grid::new(vec![-1.5], vec![1.5], 0.05).unwrap();
        let coeff = CoefficientField::constant(vec![drift], theta);
        let op = FokkerPlanck::new(&coeff, &grid);
        let lf = op.apply(&f);
        let ltu = op.apply_transpose(&u);
        let a: f64 = lf.iter().zip(&u).map(|(x, y)| x * y).sum();
        let b: f64 = f.iter().zip(&ltu).map(|(x, y)| x * y).sum();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn explicit_step_keeps_densities_nonnegative(
        drift in -1.0f64..1.0,
        theta in 0.05f64..1.0,
        f in prop::collection::vec(0.0f64..1.0, 60),
        frac in 0.1f64..1.0,
    ) {
        let grid = Grid::new(vec![-1.5], vec![1.5], 0.05).unwrap();
        let coeff = CoefficientField::constant(vec![drift], theta);
        let op = FokkerPlanck::new(&coeff, &grid);
        let dt = frac * op.max_step();
        let (g, leak) = op.step(&f, dt).unwrap();
        prop_assert!(g.iter().all(|v| *v >= -1e-15));
        prop_assert!(leak >= -1e-12);
        let before: f64 = f.iter().sum::<f64>() * grid.cell_volume();
        let after: f64 = g.iter().sum::<f64>() * grid.cell_volume();
        prop_assert!((before - after - leak).abs() < 1e-12);
    }

    #[test]
    fn reaction_moves_mass_between_compartments_only(beta in 0.0f64..8.0, alpha in 0.0f64..1.0, dt in 0.001f64..0.01) {
        let kernel = ContactKernel::new(BetaField::Constant { value: beta }, KernelShape::PolyBump { radius: 0.5, power: 6 });
        let spec = model(0.3, 0.0, kernel, alpha, 0.3, gaussian(1.0));
        let grid = Grid::new(vec![-8.0], vec![8.0], 0.05).unwrap();
        let f0 = DensityField::initial(&spec, &grid);
        let f1 = reaction_step(&f0, &spec.kernel, alpha, dt, &grid);
        let (a, b) = (f0.masses(&grid), f1.masses(&grid));
        prop_assert!((a.iter().sum::<f64>() - b.iter().sum::<f64>()).abs() < 1e-12);
        prop_assert!(b[0] <= a[0] + 1e-15 && b[2] >= a[2] - 1e-15);
        prop_assert!(f1.min_value() >= 0.0);
    }
}
