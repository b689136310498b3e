use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> EmbeddingVector {
    EmbeddingVector::normalized((0..d).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

fn corpus(n: usize, d: usize, seed: u64) -> VectorSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = VectorSet::new(d);
    for i in 0..n {
        set.push(i as u64, random_unit(&mut rng, d)).unwrap();
    }
    set
}

#[test]
fn heuristics() {
    assert_eq!(default_nlist(0), 1);
    assert_eq!(default_nlist(1), 1);
    assert_eq!(default_nlist(500), 23);
    assert_eq!(default_nlist(10_000), 100);
    assert_eq!(default_nlist(1 << 30), 4096);
    assert_eq!(default_nprobe(100), 13);
    assert_eq!(default_nprobe(1), 1);
}

#[test]
fn empty_index_returns_nothing() {
    let idx = IvfIndex::train_and_build(&VectorSet::new(8), None, 0, 1).unwrap();
    assert!(idx.is_empty());
    let q = EmbeddingVector::basis(8, 0);
    let r = idx
        .search(&SearchRequest { query: &q, k: 5, nprobe: 1, allowed_ids: None })
        .unwrap();
    assert!(r.is_empty());
}

#[test]
fn single_list_holds_everything() {
    let set = corpus(40, 16, 1);
    let idx = IvfIndex::train_and_build(&set, Some(1), 0, 1).unwrap();
    assert_eq!(idx.list_sizes(), vec![40]);
}

#[test]
fn duplicate_and_dimension_errors() {
    let set = corpus(10, 8, 2);
    let c = train_centroids(&set.vectors, 2, 0, 5).unwrap();
    let mut ids = set.ids.clone();
    ids[3] = 7;
    assert!(matches!(
        IvfIndex::build(&set.vectors, &ids, c.clone(), 1),
        Err(IndexError::DuplicateId(7))
    ));
    let mut vecs = set.vectors.clone();
    vecs[0] = EmbeddingVector::basis(4, 0);
    assert!(matches!(
        IvfIndex::build(&vecs, &set.ids, c, 1),
        Err(IndexError::DimensionMismatch { .. })
    ));
}

#[test]
fn self_match_and_empty_filter() {
    let set = corpus(300, 32, 3);
    let idx = IvfIndex::train_and_build(&set, None, 9, 1).unwrap();
    let v = &set.vectors[17];
    let r = idx
        .search(&SearchRequest { query: v, k: 3, nprobe: idx.nlist(), allowed_ids: None })
        .unwrap();
    assert_eq!(r.hits[0].id, 17);
    assert!((r.hits[0].score - 1.0).abs() < 1e-6);

    let none = IdSet::new();
    let r = idx
        .search(&SearchRequest { query: v, k: 3, nprobe: idx.nlist(), allowed_ids: Some(&none) })
        .unwrap();
    assert!(r.is_empty());

    assert!(matches!(
        idx.search(&SearchRequest { query: v, k: 3, nprobe: 0, allowed_ids: None }),
        Err(IndexError::NprobeOutOfRange { .. })
    ));
    assert!(matches!(
        idx.search(&SearchRequest { query: v, k: 3, nprobe: idx.nlist() + 1, allowed_ids: None }),
        Err(IndexError::NprobeOutOfRange { .. })
    ));
    let wrong = EmbeddingVector::basis(8, 0);
    assert!(matches!(
        idx.search(&SearchRequest { query: &wrong, k: 3, nprobe: 1, allowed_ids: None }),
        Err(IndexError::DimensionMismatch { .. })
    ));
}

#[test]
fn exact_search_examples() {
    let set = corpus(20, 8, 4);
    let q = &set.vectors[0];
    let all = exact_search(&set.vectors, &set.ids, q, 50, None).unwrap();
    assert_eq!(all.len(), 20);
    assert!(all.hits.windows(2).all(|w| w[0].score >= w[1].score));

    let one = exact_search(&set.vectors[..1], &set.ids[..1], q, 5, None).unwrap();
    assert_eq!(one.ids(), vec![0]);
    let allowed: IdSet = [1].into();
    let none = exact_search(&set.vectors[..1], &set.ids[..1], q, 5, Some(&allowed)).unwrap();
    assert!(none.is_empty());
}

#[test]
fn ties_break_by_ascending_id() {
    let v = EmbeddingVector::basis(8, 2);
    let vecs = vec![v.clone(); 4];
    let ids = vec![9, 3, 5, 1];
    let r = exact_search(&vecs, &ids, &v, 3, None).unwrap();
    assert_eq!(r.ids(), vec![1, 3, 5]);
    let c = train_centroids(&vecs, 1, 0, 3).unwrap();
    let idx = IvfIndex::build(&vecs, &ids, c, 1).unwrap();
    let r = idx.search(&SearchRequest { query: &v, k: 3, nprobe: 1, allowed_ids: None }).unwrap();
    assert_eq!(r.ids(), vec![1, 3, 5]);
}

#[test]
fn full_probe_matches_exact_scan() {
    let set = corpus(2_000, 32, 5);
    let idx = IvfIndex::train_and_build(&set, None, 1, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..40 {
        let q = random_unit(&mut rng, 32);
        let mask: IdSet = set.ids.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
        for allowed in [None, Some(&mask)] {
            let a = idx
                .search(&SearchRequest { query: &q, k: 10, nprobe: idx.nlist(), allowed_ids: allowed })
                .unwrap();
            let b = exact_search(&set.vectors, &set.ids, &q, 10, allowed).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn partitions_are_disjoint_and_complete() {
    let set = corpus(500, 16, 6);
    let idx = IvfIndex::train_and_build(&set, Some(12), 3, 1).unwrap();
    let mut all: Vec<u64> = (0..idx.nlist()).flat_map(|l| idx.list_ids(l).to_vec()).collect();
    assert_eq!(all.len(), idx.len());
    all.sort_unstable();
    assert_eq!(all, set.ids);
    // Every vector sits in the list of its best centroid by inner product.
    for l in 0..idx.nlist() {
        for &id in idx.list_ids(l) {
            let v = idx.vector(id).unwrap();
            assert_eq!(idx.centroids().route(v), l);
        }
    }
}

#[test]
fn save_load_round_trip() {
    let set = corpus(400, 16, 7);
    let idx = IvfIndex::train_and_build(&set, None, 2, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.idx");
    idx.save(&path).unwrap();
    let back = IvfIndex::load(&path).unwrap();
    assert_eq!(back, idx);

    let bytes = idx.to_bytes();
    assert!(matches!(
        IvfIndex::from_bytes(&bytes[..bytes.len() - 5]),
        Err(IndexError::CorruptFile(_))
    ));
    let mut bad = bytes.clone();
    bad[1] ^= 0xff;
    assert!(matches!(IvfIndex::from_bytes(&bad), Err(IndexError::CorruptFile(_))));
    let mut flipped = bytes.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 0x10;
    assert!(matches!(IvfIndex::from_bytes(&flipped), Err(IndexError::CorruptFile(_))));
    let mut ver = bytes.clone();
    ver[8] = 2;
    assert!(matches!(IvfIndex::from_bytes(&ver), Err(IndexError::VersionMismatch { .. })));
    assert!(matches!(IvfIndex::from_bytes(&[]), Err(IndexError::CorruptFile(_))));
}

#[test]
fn mean_recall_grows_with_nprobe() {
    let set = corpus(3_000, 16, 8);
    let idx = IvfIndex::train_and_build(&set, None, 8, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    let queries: Vec<_> = (0..200).map(|_| random_unit(&mut rng, 16)).collect();
    let truth: Vec<Vec<u64>> = queries
        .iter()
        .map(|q| exact_search(&set.vectors, &set.ids, q, 10, None).unwrap().ids())
        .collect();
    let mut last = 0.0;
    for nprobe in 1..=idx.nlist() {
        let mut hit = 0;
        for (q, t) in queries.iter().zip(&truth) {
            let got = idx.search(&SearchRequest { query: q, k: 10, nprobe, allowed_ids: None }).unwrap();
            hit += got.ids().iter().filter(|id| t.contains(id)).count();
        }
        let recall = hit as f64 / 2000.0;
        assert!(recall >= last, "nprobe {nprobe}: {recall} < {last}");
        last = recall;
    }
    assert_eq!(last, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filtered_results_respect_mask(seed in 0u64..1000, keep in 0.0f64..1.0, nprobe in 1usize..6) {
        let set = corpus(120, 8, seed);
        let idx = IvfIndex::train_and_build(&set, Some(5), seed, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let mask: IdSet = set.ids.iter().copied().filter(|_| rng.gen_bool(keep)).collect();
        let q = random_unit(&mut rng, 8);
        let r = idx.search(&SearchRequest { query: &q, k: 7, nprobe, allowed_ids: Some(&mask) }).unwrap();
        prop_assert!(r.len() <= 7);
        let uniq: std::collections::HashSet<_> = r.ids().into_iter().collect();
        prop_assert_eq!(uniq.len(), r.len());
        for w in r.hits.windows(2) {
            prop_assert!(w[0].score >= w[1].score);
        }
        for h in &r.hits {
            prop_assert!(mask.contains(&h.id));
        }
    }
}
