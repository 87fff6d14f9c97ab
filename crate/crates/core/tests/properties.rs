use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tokensyn::geom::{chain_descriptors, extract_internal, rebuild_chain, rmsd_raw};
use tokensyn::io::{parse_structure, write_structure, StructureFileOptions};
use tokensyn::metrics::{evaluate_ensembles, mean_pairwise_rmsd, rmsf};
use tokensyn::perturb::perturbed_decodes;
use tokensyn::tokenizer::lossless_codebook;
use tokensyn::{
    build_synonym_dict, decode, encode, rmsd_aligned, synonym_swap, synth, tm_score, train_codebook, Chain, Codebook,
    Ensemble, Point, Source, SwapConfig, TokenSeq,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("non-degenerate quaternion", |q| q.iter().map(|v| v * v).sum::<f64>() > 1e-3)
        .prop_map(|q| *UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3])).to_rotation_matrix().matrix())
}

fn translation() -> impl Strategy<Value = Point> {
    prop::array::uniform3(-100.0f64..100.0).prop_map(|t| Point::new(t[0], t[1], t[2]))
}

fn cloud(n: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec(prop::array::uniform3(-10.0f64..10.0).prop_map(|p| Point::new(p[0], p[1], p[2])), n)
}

fn training_codebook(m: usize, seed: u64) -> Codebook {
    let mut r = rng(seed);
    let samples: Vec<Vec<f64>> = (0..20)
        .flat_map(|_| chain_descriptors(&synth::random_chain(60, &mut r), 5).unwrap())
        .map(|d| d.values)
        .collect();
    train_codebook(&samples, m, 50, seed).unwrap().codebook
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rmsd_is_symmetric(a in cloud(12), b in cloud(12)) {
        let (ca, cb) = (Chain::new("a", a).unwrap(), Chain::new("b", b).unwrap());
        prop_assert!((rmsd_aligned(&ca, &cb).unwrap() - rmsd_aligned(&cb, &ca).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn tm_score_in_unit_interval(seed in any::<u64>(), len in 19usize..120) {
        let mut r = rng(seed);
        let a = synth::random_chain(len, &mut r);
        let b = synth::random_chain(len, &mut r);
        let tm = tm_score(&a, &b).unwrap();
        prop_assert!(tm > 0.0 && tm <= 1.0);
        prop_assert_eq!(tm_score(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn descriptors_invariant_to_rigid_motion(seed in any::<u64>(), rot in rotation(), t in translation(), w in prop::sample::select(vec![5usize, 7, 9])) {
        let c = synth::random_chain(40, &mut rng(seed));
        let moved = c.transformed(&rot, &t);
        for (a, b) in chain_descriptors(&c, w).unwrap().iter().zip(chain_descriptors(&moved, w).unwrap()) {
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rebuild_extract_roundtrip(seed in any::<u64>(), len in 4usize..500) {
        let c = synth::random_chain(len, &mut rng(seed));
        let (frame, internal) = extract_internal(&c).unwrap();
        let back = rebuild_chain(&internal, frame).unwrap();
        prop_assert!(rmsd_aligned(&c, &back).unwrap() < 1e-6);
    }

    #[test]
    fn encode_invariant_to_rigid_motion(seed in any::<u64>(), rot in rotation(), t in translation()) {
        let cb = training_codebook(32, 3);
        let c = synth::random_chain(50, &mut rng(seed));
        let a = encode(&c, &cb, 5).unwrap();
        prop_assert_eq!(a.len(), c.residue_count());
        prop_assert_eq!(encode(&c.transformed(&rot, &t), &cb, 5).unwrap(), a);
    }

    #[test]
    fn decode_is_finite_for_any_valid_tokens(tokens in prop::collection::vec(0u32..32, 5..80)) {
        let cb = training_codebook(32, 4);
        let c = decode(&TokenSeq { tokens: tokens.clone(), codebook_id: cb.id().into(), window: 5 }, &cb, 5).unwrap();
        prop_assert_eq!(c.residue_count(), tokens.len());
        prop_assert!(c.coords().iter().all(|p| p.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn lossless_encode_decode_encode_identity(seed in any::<u64>(), len in 5usize..80) {
        let c = synth::random_chain(len, &mut rng(seed));
        let cb = lossless_codebook(std::slice::from_ref(&c), 5).unwrap();
        let t = encode(&c, &cb, 5).unwrap();
        prop_assert_eq!(encode(&decode(&t, &cb, 5).unwrap(), &cb, 5).unwrap(), t);
    }

    #[test]
    fn swaps_stay_in_synonym_sets(seed in any::<u64>(), tau in 0.0f64..3.0, p in 0.0f64..=1.0) {
        let cb = training_codebook(64, 5);
        let dict = build_synonym_dict(&cb, tau).unwrap();
        let seq = encode(&synth::random_chain(40, &mut rng(seed)), &cb, 5).unwrap();
        let out = synonym_swap(&seq, &dict, seed, p).unwrap();
        for (a, b) in seq.tokens.iter().zip(&out.tokens) {
            prop_assert!(dict.synonyms(*a as usize).contains(b));
        }
        prop_assert_eq!(synonym_swap(&seq, &dict, seed, 0.0).unwrap(), seq.clone());
        let singletons = build_synonym_dict(&cb, 0.0).unwrap();
        prop_assert_eq!(synonym_swap(&seq, &singletons, seed, 1.0).unwrap(), seq);
    }

    #[test]
    fn kmeans_inertia_non_increasing(seed in any::<u64>(), m in 2usize..24) {
        let mut r = rng(seed);
        let samples: Vec<Vec<f64>> = chain_descriptors(&synth::random_chain(80, &mut r), 5).unwrap().into_iter().map(|d| d.values).collect();
        let fit = train_codebook(&samples, m, 30, seed).unwrap();
        for w in fit.inertia.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn pdb_roundtrip_within_quantization(coords in prop::collection::vec(prop::array::uniform3(-999.0f64..9999.0), 1..30)) {
        let c = Chain::new("x", coords.iter().map(|p| Point::new(p[0], p[1], p[2])).collect()).unwrap();
        let e = Ensemble::new(vec![c.clone(), c], Source::Generated).unwrap();
        let back = parse_structure(&write_structure(&e).unwrap(), &StructureFileOptions::default()).unwrap();
        prop_assert_eq!(back.residues(), e.residues());
        for (a, b) in back.conformations()[1].coords().iter().zip(e.conformations()[1].coords()) {
            prop_assert!((a - b).abs().max() <= 0.0005 + 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn metrics_invariant_to_rigid_motion_and_order(seed in any::<u64>(), rot in rotation(), t in translation(), shift in 1usize..9) {
        let mut r = rng(seed);
        let base = synth::random_chain(25, &mut r);
        let gen: Vec<Chain> = (0..10).map(|_| synth::jitter(&base, 0.5, &mut r)).collect();
        let reference: Vec<Chain> = (0..10).map(|_| synth::jitter(&base, 0.8, &mut r)).collect();
        let a = evaluate_ensembles(
            &Ensemble::new(gen.clone(), Source::Generated).unwrap(),
            &Ensemble::new(reference.clone(), Source::Reference).unwrap(),
        ).unwrap();
        let mut reordered = gen;
        reordered.rotate_left(shift);
        let moved: Vec<Chain> = reference.iter().map(|c| c.transformed(&rot, &t)).collect();
        let b = evaluate_ensembles(
            &Ensemble::new(reordered, Source::Generated).unwrap(),
            &Ensemble::new(moved, Source::Reference).unwrap(),
        ).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-6;
        prop_assert!(close(a.per_target_rmsf_r.unwrap(), b.per_target_rmsf_r.unwrap()));
        prop_assert!(close(a.md_pca_w2.unwrap(), b.md_pca_w2.unwrap()));
        prop_assert!(close(a.joint_pca_w2.unwrap(), b.joint_pca_w2.unwrap()));
        prop_assert!(close(a.mean_pairwise_rmsd_generated, b.mean_pairwise_rmsd_generated));
        prop_assert!(close(a.mean_pairwise_rmsd_reference, b.mean_pairwise_rmsd_reference));
        prop_assert!(a.rmsf_generated.iter().zip(&b.rmsf_generated).all(|(x, y)| close(*x, *y)));
    }

    #[test]
    fn pairwise_rmsd_zero_for_rigid_copies(seed in any::<u64>(), rot in rotation(), t in translation()) {
        let c = synth::random_chain(30, &mut rng(seed));
        let copies = Ensemble::new(vec![c.clone(), c.transformed(&rot, &t), c.transformed(&rot.transpose(), &(-t))], Source::Reference).unwrap();
        prop_assert!(mean_pairwise_rmsd(&copies).unwrap() < 1e-9);
        let mut moved = c.coords().to_vec();
        moved[3] += Point::new(0.5, 0.0, 0.0);
        let distinct = Ensemble::new(vec![c.clone(), Chain::new("m", moved).unwrap()], Source::Reference).unwrap();
        prop_assert!(mean_pairwise_rmsd(&distinct).unwrap() > 1e-3);
        prop_assert!(rmsf(&distinct).unwrap().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn sample_streams_are_prefix_stable(seed in any::<u64>(), n in 1usize..12) {
        let cb = training_codebook(64, 6);
        let dict = build_synonym_dict(&cb, 2.0).unwrap();
        let tokens = encode(&synth::random_chain(30, &mut rng(seed)), &cb, 5).unwrap();
        let short = perturbed_decodes(&tokens, &cb, &dict, &SwapConfig { seed, swap_prob: 1.0, num_samples: n }, 5).unwrap();
        let long = perturbed_decodes(&tokens, &cb, &dict, &SwapConfig { seed, swap_prob: 1.0, num_samples: n + 1 }, 5).unwrap();
        for (a, b) in short.iter().zip(&long) {
            prop_assert_eq!(rmsd_raw(a.coords(), b.coords()).unwrap(), 0.0);
        }
    }
}

#[test]
fn rebuild_extract_at_length_500() {
    let c = synth::random_chain(500, &mut rng(11));
    let (frame, internal) = extract_internal(&c).unwrap();
    assert!(rmsd_aligned(&c, &rebuild_chain(&internal, frame).unwrap()).unwrap() < 1e-6);
}
