mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use retarget_core::bvh::{
    parse_bvh, parse_bvh_bytes, read_bvh_file, write_bvh, BvhDocument, FrameTable,
};
use retarget_core::skeleton::ChannelKind;

fn round_trip(doc: &BvhDocument, precision: usize) -> BvhDocument {
    parse_bvh(&write_bvh(doc, precision)).expect("written document parses")
}

#[test]
fn corpus_covers_required_features() {
    let docs: Vec<BvhDocument> = common::corpus_paths()
        .iter()
        .map(|p| read_bvh_file(p).unwrap())
        .collect();
    assert!(docs.len() >= 8);
    assert!(docs.iter().any(|d| d.frame_count() == 0));
    assert!(docs
        .iter()
        .any(|d| d.skeleton.joints().iter().any(|j| j.end_site)));
    assert!(docs.iter().any(|d| d
        .skeleton
        .joints()
        .iter()
        .filter(|j| j.parent.is_some())
        .count()
        >= 8));
    let orders: BTreeSet<String> = docs
        .iter()
        .flat_map(|d| {
            d.skeleton
                .joints()
                .iter()
                .filter_map(|j| j.rotation_order())
                .map(|o| format!("{o:?}"))
                .collect::<Vec<_>>()
        })
        .collect();
    assert!(orders.len() >= 3, "{orders:?}");
    let kinds: BTreeSet<&str> = docs
        .iter()
        .flat_map(|d| {
            d.skeleton
                .joints()
                .iter()
                .flat_map(|j| j.channels.iter().map(|c| c.name()))
        })
        .collect();
    assert_eq!(kinds.len(), 6, "{kinds:?}");
}

#[test]
fn corpus_round_trips() {
    for path in common::corpus_paths() {
        let doc = read_bvh_file(&path).unwrap();
        let again = round_trip(&doc, 6);
        assert_eq!(again.skeleton, doc.skeleton, "{}", path.display());
        let diff = doc.max_numeric_difference(&again).expect("same shape");
        assert!(diff < 1e-6, "{}: {diff}", path.display());
        assert_eq!(
            round_trip(&again, 6),
            again,
            "write is stable: {}",
            path.display()
        );
    }
}

#[test]
fn every_channel_has_one_column() {
    for path in common::corpus_paths() {
        let doc = read_bvh_file(&path).unwrap();
        let starts = doc.skeleton.channel_offsets();
        let mut next = 0;
        for (j, joint) in doc.skeleton.joints().iter().enumerate() {
            assert_eq!(starts[j], next);
            next += joint.channels.len();
        }
        assert_eq!(next, doc.frames.columns());
        assert_eq!(
            doc.frames.values().len(),
            doc.frames.columns() * doc.frame_count()
        );
    }
}

fn corpus_texts() -> Vec<String> {
    common::corpus_paths()
        .iter()
        .map(|p| std::fs::read_to_string(p).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        let _ = parse_bvh_bytes(&bytes);
    }

    #[test]
    fn mutated_corpus_never_panics(file in 0usize..10, cut in 0.0f64..1.0, edits in proptest::collection::vec((0.0f64..1.0, any::<u8>()), 0..8)) {
        let texts = corpus_texts();
        let mut bytes = texts[file % texts.len()].clone().into_bytes();
        for (at, b) in edits {
            let i = ((bytes.len() - 1) as f64 * at) as usize;
            bytes[i] = b;
        }
        bytes.truncate((bytes.len() as f64 * cut) as usize + 1);
        let _ = parse_bvh_bytes(&bytes);
    }

    #[test]
    fn random_frames_round_trip(file in 0usize..10, seed in any::<u64>()) {
        let paths = common::corpus_paths();
        let doc = read_bvh_file(&paths[file % paths.len()]).unwrap();
        let mut rng = common::rng(seed);
        let frames = rand::Rng::random_range(&mut rng, 0..6);
        let data = (0..frames * doc.frames.columns()).map(|_| rand::Rng::random_range(&mut rng, -1e3..1e3)).collect();
        let doc = BvhDocument::new(doc.skeleton.clone(), FrameTable::new(doc.frames.columns(), frames, data), doc.frame_time);
        let again = round_trip(&doc, 9);
        prop_assert_eq!(&again.skeleton, &doc.skeleton);
        prop_assert!(doc.max_numeric_difference(&again).unwrap() < 1e-6);
    }
}

#[test]
fn channel_names_round_trip() {
    for name in [
        "Xposition",
        "Yposition",
        "Zposition",
        "Xrotation",
        "Yrotation",
        "Zrotation",
    ] {
        assert_eq!(ChannelKind::parse(name).unwrap().name(), name);
    }
}
