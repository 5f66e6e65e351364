use proptest::prelude::*;
use std::path::PathBuf;
use topolat::catalog::{dirac_even, ssh};
use topolat::{bloch_fiber, linalg};
use topolat_cli::modelfile::*;

fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models")
}

fn read(name: &str) -> ModelFile {
    ModelFile::parse(&std::fs::read_to_string(models_dir().join(name)).unwrap()).unwrap()
}

#[test]
fn shipped_models_round_trip() {
    for entry in std::fs::read_dir(models_dir()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let a = ModelFile::parse(&text).unwrap();
        let b = ModelFile::parse(&a.to_toml().unwrap()).unwrap();
        assert_eq!(a, b, "{}", path.display());
        assert_eq!(a.to_toml().unwrap(), b.to_toml().unwrap());
    }
}

#[test]
fn shipped_models_match_catalog() {
    let cases = [("ssh.toml", ssh(0.5, 0.0, 0.0, 1)), ("dirac2.toml", dirac_even(2, -1.0).unwrap())];
    for (name, reference) in cases {
        let m = read(name).bulk().unwrap();
        for k in [[0.3, -1.1], [2.0, 0.7], [-2.5, 3.0]] {
            let k = &k[..m.d];
            let diff = bloch_fiber(&m, k).unwrap() - bloch_fiber(&reference, k).unwrap();
            assert!(linalg::max_abs(&diff) < 1e-14, "{name} at {k:?}");
        }
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = "[model]\nd = 1\nfiber = 1\ncolour = 3\n";
    assert!(ModelFile::parse(text).is_err());
    let text = "[model]\nd = 1\nfiber = 1\n[extra]\nx = 1\n";
    assert!(ModelFile::parse(text).is_err());
    let text = "[model]\nd = 1\nfiber = 1\n[[hopping]]\ny = [1]\nre = [[1.0]]\nlabda = 0.1\n";
    assert!(ModelFile::parse(text).is_err());
}

#[test]
fn shape_errors_are_reported() {
    let f = ModelFile::parse("[model]\nd = 1\nfiber = 2\n[[hopping]]\ny = [1]\nre = [[1.0]]\n").unwrap();
    assert!(f.bulk().is_err());
    let f = ModelFile::parse("[model]\nd = 2\nfiber = 1\n[[hopping]]\ny = [1]\nre = [[1.0]]\n").unwrap();
    assert!(f.bulk().is_err());
}

#[test]
fn seeds_beyond_toml_range_do_not_serialize() {
    let mut f = read("ssh_disordered.toml");
    f.disorder.as_mut().unwrap().seed = u64::MAX;
    assert!(f.to_toml().is_err());
}

#[test]
fn field_is_in_units_of_two_pi() {
    let m = read("harper.toml").bulk().unwrap();
    assert!((m.field.b[0][1] - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
}

#[test]
fn mass_scaling() {
    let f = read("ssh.toml");
    let m = f.with_mass(4.0).unwrap().bulk().unwrap();
    assert!((m.hoppings[1].w[(1, 0)].im - 2.0).abs() < 1e-15);
}

fn matrix(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, n), n)
}

fn model_file() -> impl Strategy<Value = ModelFile> {
    (1usize..3, 1usize..3).prop_flat_map(|(d, n)| {
        let hop = (prop::collection::vec(-2i64..3, d), matrix(n), prop::option::of(matrix(n)), 0.0f64..2.0)
            .prop_map(|(y, re, im, lambda)| MatrixEntry { y, re, im, lambda });
        (
            prop::collection::vec(hop, 0..4),
            any::<bool>(),
            -3.0f64..3.0,
            prop::option::of(0..=i64::MAX as u64),
            prop::option::of(0.0f64..1.0),
        )
            .prop_map(move |(hopping, chiral, mu, seed, flux)| ModelFile {
                model: ModelSection { d, fiber: n, chiral, mu },
                hopping,
                field: flux.filter(|_| d == 2).map(|flux| FieldSection { entry: vec![FieldEntry { i: 0, j: 1, flux }] }),
                disorder: seed.map(|seed| DisorderSection { seed, boundary_seed: None, lambda: None }),
                volume: Some(VolumeSection { sizes: vec![4; d], bc: vec![BcName::Open; d] }),
                halfspace: None,
                pump: None,
            })
    })
}

proptest! {
    #[test]
    fn round_trip_is_idempotent(f in model_file()) {
        let text = f.to_toml().unwrap();
        let g = ModelFile::parse(&text).unwrap();
        prop_assert_eq!(&f, &g);
        prop_assert_eq!(text, g.to_toml().unwrap());
    }
}
