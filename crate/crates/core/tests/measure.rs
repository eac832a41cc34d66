use proptest::prelude::*;
use sirlab_core::measure::*;
use sirlab_core::model::*;
use sirlab_core::particle::{init_population, PopulationState};
use sirlab_core::pde::{DensityField, Grid};
use sirlab_core::quadrature::GaussLegendre;

fn family(d: usize) -> SeedFamily {
    SeedFamily { center: vec![0.0; d], half_width: 3.0, bump_power: 4 }
}

fn spec() -> ModelSpec {
    ModelSpec::new(
        1,
        CompartmentCoefficients::uniform(CoefficientField::constant(vec![0.0], 0.3)),
        ContactKernel::new(BetaField::Constant { value: 2.0 }, KernelShape::PolyBump { radius: 0.5, power: 6 }),
        0.3,
        InitialLaw {
            density: DensityFamily::Gaussian { mean: vec![0.0], std: 1.0 },
            region: Region::Box { lo: vec![-0.5], hi: vec![0.5] },
            p_infect: 0.4,
            sigma: 1.0,
        },
    )
    .unwrap()
}

#[test]
fn dictionaries_are_orthonormal() {
    for (d, p) in [(1, 10), (2, 10)] {
        let dict = basis_build(&family(d), p, 2, 1.0).unwrap();
        assert_eq!(dict.len(), p);
        assert!(dict.identity_error() < 1e-8, "d = {d}: {}", dict.identity_error());
    }
}

#[test]
fn smaller_dictionary_is_a_prefix() {
    let small = basis_build(&family(1), 5, 2, 1.0).unwrap();
    let large = basis_build(&family(1), 12, 2, 1.0).unwrap();
    let (mut a, mut b) = (vec![0.0; 5], vec![0.0; 12]);
    for k in 0..50 {
        let y = -3.0 + 6.0 * k as f64 / 49.0;
        small.eval_all(&[y], &mut a);
        large.eval_all(&[y], &mut b);
        for p in 0..5 {
            assert!((a[p] - b[p]).abs() < 1e-8 * (1.0 + a[p].abs()), "member {p} at {y}");
        }
    }
}

#[test]
fn members_vanish_outside_the_support() {
    let dict = basis_build(&family(1), 6, 2, 1.0).unwrap();
    assert_eq!(delta_norm(&[3.5], &dict), 0.0);
    assert!(delta_norm(&[0.3], &dict) > 0.0);
}

#[test]
fn empirical_pairings_are_averages() {
    let dict = basis_build(&family(1), 4, 2, 1.0).unwrap();
    let state = init_population(&spec(), 500, 4).unwrap();
    let coords = pair_dictionary(&state, &dict);
    let mut v = vec![0.0; 4];
    let mut expect = [[0.0; 4]; 3];
    for i in 0..state.len() {
        dict.eval_all(state.position(i), &mut v);
        for p in 0..4 {
            expect[state.labels[i].index()][p] += v[p] / state.len() as f64;
        }
    }
    for c in 0..3 {
        for p in 0..4 {
            assert!((coords[c][p] - expect[c][p]).abs() < 1e-12);
        }
    }
}

#[test]
fn field_pairings_match_quadrature() {
    let dict = basis_build(&family(1), 5, 2, 1.0).unwrap();
    let model = spec();
    let grid = Grid::new(vec![-8.0], vec![8.0], 0.01).unwrap();
    let field = DensityField::initial(&model, &grid);
    let coords = field_dictionary(&field, &grid, &dict);
    let gl = GaussLegendre::new(20);
    let law = &model.initial;
    for p in 0..5 {
        let m = dict.member(p);
        let s = [(-8.0, -0.5), (-0.5, 0.5), (0.5, 8.0)]
            .iter()
            .map(|&(a, b)| gl.integrate(a, b, |x| m.value(&[x]) * law.susceptible_density(&[x])))
            .sum::<f64>();
        let i = gl.integrate(-0.5, 0.5, |x| m.value(&[x]) * law.infected_density(&[x]));
        assert!((coords[0][p] - s).abs() < 1e-4, "S member {p}: {} vs {s}", coords[0][p]);
        assert!((coords[1][p] - i).abs() < 1e-4, "I member {p}: {} vs {i}", coords[1][p]);
        assert_eq!(coords[2][p], 0.0);
    }
}

#[test]
fn fluctuation_scales_with_root_n() {
    let dict = basis_build(&family(1), 3, 2, 1.0).unwrap();
    let model = spec();
    let grid = Grid::new(vec![-8.0], vec![8.0], 0.01).unwrap();
    let field = DensityField::initial(&model, &grid);
    let state = init_population(&model, 400, 8).unwrap();
    let coords = fluctuation_coords(&state, &field, &grid, &dict).unwrap();
    let emp = pair_dictionary(&state, &dict);
    let mean = field_dictionary(&field, &grid, &dict);
    for c in 0..3 {
        for p in 0..3 {
            assert!((coords[c][p] - 20.0 * (emp[c][p] - mean[c][p])).abs() < 1e-9);
        }
    }
}

#[test]
fn kde_carries_the_compartment_fraction() {
    let state = init_population(&spec(), 2000, 2).unwrap();
    let grid = Grid::new(vec![-8.0], vec![8.0], 0.02).unwrap();
    let bw = silverman_bandwidth(&state, Compartment::S);
    let kde = kde(&state, Compartment::S, bw, &grid).unwrap();
    let frac = state.count(Compartment::S) as f64 / state.len() as f64;
    assert!((grid.integrate(&kde.values) - frac).abs() < 1e-3);
    assert!(!kde.coverage_warning);
}

fn state_of(xs: &[f64]) -> PopulationState {
    let labels = (0..xs.len()).map(|k| Compartment::from_index(k % 3).unwrap()).collect();
    PopulationState::new(0.0, 1, xs.to_vec(), labels).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn pairing_is_linear(xs in prop::collection::vec(-4.0f64..4.0, 1..60), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let state = state_of(&xs);
        for c in Compartment::ALL {
            let lhs = pair(&state, c, |x| a * x[0].sin() + b * x[0] * x[0]);
            let rhs = a * pair(&state, c, |x| x[0].sin()) + b * pair(&state, c, |x| x[0] * x[0]);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn dual_norm_dominates_each_coordinate(values in prop::collection::vec(-5.0f64..5.0, 1..20)) {
        let coords = SignedMeasureCoords { compartment: Compartment::I, time: 0.0, n: 1, values: values.clone() };
        let norm = dual_norm(&coords);
        prop_assert!(values.iter().all(|v| v.abs() <= norm + 1e-12));
    }
}
