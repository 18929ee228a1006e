mod common;

use lazygnn::data::{generate_sbm, Dataset, SbmSpec};
use lazygnn::trainer::{TrainConfig, Trainer};
use lazygnn::{sample_lhop, Hyperparams, LazyState, Matrix, Store};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// One mini-batch step writes exactly the target rows of both stores.
    #[test]
    fn scatter_touches_only_targets(
        seed in any::<u64>(),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..8),
        layers in 1usize..3,
    ) {
        let data = common::random_dataset(40, 4, 3, seed);
        let cfg = TrainConfig { hp: Hyperparams { layers, ..Hyperparams::default() }, batch_size: 4, hidden: vec![5], ..TrainConfig::default() };
        let mut trainer = Trainer::new(&data, &cfg).unwrap();
        // warm every row so untouched rows hold real values
        let all: Vec<usize> = (0..40).collect();
        trainer.step(&data.graph, &all, 40).unwrap();
        let before = trainer.state().clone();

        let mut targets: Vec<usize> = picks.iter().map(|p| data.split.train[p.index(data.split.train.len())]).collect();
        targets.dedup();
        let batch = sample_lhop(&data.graph, &targets, layers).unwrap();
        trainer.step(&batch.local_graph, &batch.closure, batch.num_targets()).unwrap();
        let after = trainer.state();
        let targets = &batch.closure[..batch.num_targets()];
        for which in [Store::Features, Store::Gradients] {
            for v in 0..40 {
                let same = before.matrix(which).row(v) == after.matrix(which).row(v);
                if targets.contains(&v) {
                    prop_assert_eq!(after.staleness(which, &[v])[0], Some(0));
                } else {
                    prop_assert!(same, "row {} of {:?} changed outside the targets", v, which);
                }
            }
        }
    }

    #[test]
    fn store_size_is_independent_of_depth(n in 1usize..500, c in 1usize..20) {
        let s: LazyState = LazyState::new(n, c);
        prop_assert_eq!(s.store_bytes(), 2 * n * c * 8);
        let s32: LazyState<f32> = LazyState::new(n, c);
        prop_assert_eq!(s32.store_bytes(), 2 * n * c * 4);
    }
}

#[test]
fn trainer_store_bytes_do_not_depend_on_layers() {
    let data: Dataset =
        generate_sbm(&SbmSpec { blocks: 3, nodes_per_block: 30, seed: 1, ..SbmSpec::default() }).unwrap();
    let sizes: Vec<usize> = [1, 2, 4, 8]
        .into_iter()
        .map(|layers| {
            let cfg = TrainConfig {
                epochs: 2,
                hp: Hyperparams { layers, ..Hyperparams::default() },
                ..TrainConfig::default()
            };
            let mut t = Trainer::new(&data, &cfg).unwrap();
            t.run_epoch().unwrap().store_bytes
        })
        .collect();
    assert!(sizes.iter().all(|&s| s == 2 * 90 * 3 * 8), "{sizes:?}");
}

#[test]
fn checkpoint_round_trip_keeps_cold_rows_cold() {
    let mut s: LazyState = LazyState::new(5, 3);
    let rows = common::random_matrix(2, 3, &mut common::rng(1));
    s.scatter(Store::Features, &[4, 1], &rows).unwrap();
    s.scatter(Store::Gradients, &[0], &Matrix::zeros(1, 3)).unwrap();
    let mut buf = Vec::new();
    s.write_checkpoint(&mut buf).unwrap();
    assert_eq!(&buf[..4], b"LZST");
    assert_eq!(buf.len(), 4 + 4 + 8 + 8 + 2 * 5 * 3 * 8);
    let back: LazyState = LazyState::read_checkpoint(&buf[..]).unwrap();
    assert_eq!(back.matrix(Store::Features), s.matrix(Store::Features));
    assert_eq!(back.initialized(Store::Features), vec![false, true, false, false, true]);
    assert_eq!(back.initialized(Store::Gradients), vec![true, false, false, false, false]);
    assert!(LazyState::<f64>::read_checkpoint(&buf[..20]).is_err());
}
