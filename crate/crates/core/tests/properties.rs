mod common;

use common::{refine, NotchedRoom};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssrkit::boundary::{extract_corners, extrude_boundary_mesh};
use ssrkit::commands::{parse_candidate_object, parse_commands, render_commands};
use ssrkit::math::{Quaternion, Vec3};
use ssrkit::metrics::group_advantage;
use ssrkit::sampler::{filtered_distribution, SamplerConfig, ScoredAsset};
use ssrkit::ssr::{add_object, augment, parse_ssr, serialize_ssr, Scene, SceneObject, JITTER};
use ssrkit::voxel::{
    compute_mbl_pair, compute_vbl, place_object_voxels, scene_lattice_origin, BoxGeometry,
    VoxelConfig,
};

fn random_scene(seed: u64, min: usize, max: usize) -> (NotchedRoom, Scene) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let room = NotchedRoom::random(&mut rng);
    let n = rng.gen_range(min..=max);
    let objects = (0..n)
        .map(|_| common::random_box(&mut rng, &room))
        .collect();
    let scene = room.scene().with_objects(objects);
    (room, scene)
}

fn yawed_scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, mut scene) = random_scene(seed, 2, 6);
    for o in &mut scene.objects {
        o.rot = Quaternion::from_yaw(rng.gen_range(0.0..std::f64::consts::TAU));
    }
    scene
}

fn vox() -> VoxelConfig {
    VoxelConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn mbl_is_symmetric(seed in any::<u64>()) {
        let scene = yawed_scene(seed);
        let origin = scene_lattice_origin(&scene, &vox());
        let grids: Vec<_> = scene.objects.iter().map(|o| place_object_voxels(o, None, &vox(), origin).unwrap()).collect();
        for i in 0..grids.len() {
            for j in 0..grids.len() {
                prop_assert_eq!(compute_mbl_pair(&grids[i], &grids[j]).unwrap(), compute_mbl_pair(&grids[j], &grids[i]).unwrap());
            }
        }
    }

    #[test]
    fn early_stop_is_transparent(seed in any::<u64>()) {
        let scene = yawed_scene(seed);
        let fast = compute_vbl(&scene, &BoxGeometry, &vox()).unwrap();
        let slow = compute_vbl(&scene, &BoxGeometry, &VoxelConfig { early_stop: false, ..vox() }).unwrap();
        prop_assert_eq!(fast, slow);
    }

    #[test]
    fn lattice_translation_keeps_counts(seed in any::<u64>(), dx in -40i32..40, dz in -40i32..40) {
        let (_, scene) = random_scene(seed, 3, 6);
        let shift = Vec3::new(dx as f64 * 0.05, 0.0, dz as f64 * 0.05);
        let mut moved = scene.clone();
        moved.bounds_top.iter_mut().chain(moved.bounds_bottom.iter_mut()).for_each(|v| *v = *v + shift);
        moved.objects.iter_mut().for_each(|o| o.pos = o.pos + shift);
        let a = compute_vbl(&scene, &BoxGeometry, &vox()).unwrap();
        let b = compute_vbl(&moved, &BoxGeometry, &vox()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn adding_an_object_never_lowers_violations(seed in any::<u64>()) {
        let (room, scene) = random_scene(seed, 1, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let after = add_object(&scene, common::random_box(&mut rng, &room));
        let before = compute_vbl(&scene, &BoxGeometry, &vox()).unwrap();
        let grown = compute_vbl(&after, &BoxGeometry, &vox()).unwrap();
        prop_assert!(grown.vbl_voxels >= before.vbl_voxels);
        prop_assert!(grown.oob_voxels >= before.oob_voxels);
        prop_assert!(grown.mbl_voxels >= before.mbl_voxels);
    }

    #[test]
    fn corners_survive_refinement(seed in any::<u64>()) {
        let (room, scene) = random_scene(seed, 0, 0);
        let poly = scene.floor_polygon().unwrap();
        let mesh = extrude_boundary_mesh(&poly).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let refined = refine(&mesh, &mut rng, 60);
        let got = extract_corners(&refined).unwrap();
        prop_assert_eq!(got.len(), poly.len());
        prop_assert!((got.area() - room.area()).abs() < 1e-6);
        let want = poly.canonicalized();
        for (a, b) in got.corners().iter().zip(want.corners()) {
            prop_assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6, "{:?} vs {:?}", a, b);
        }
    }
}

proptest! {
    #[test]
    fn ssr_round_trips(seed in any::<u64>()) {
        let scene = yawed_scene(seed);
        let text = serialize_ssr(&scene);
        let back = parse_ssr(&text).unwrap();
        prop_assert_eq!(serialize_ssr(&back), text);
        prop_assert_eq!(back, scene);
    }

    #[test]
    fn augment_keeps_room_shape(seed in any::<u64>(), aug in any::<u64>()) {
        let (room, scene) = random_scene(seed, 1, 8);
        let out = augment(&scene, aug);
        prop_assert_eq!(out.bounds_bottom.len(), scene.bounds_bottom.len());
        prop_assert_eq!(out.objects.len(), scene.objects.len());
        let area = out.floor_polygon().unwrap().area();
        prop_assert!((area - room.area()).abs() < 1e-6, "area {} vs {}", area, room.area());
        for (a, b) in out.objects.iter().zip(&scene.objects) {
            prop_assert_eq!(a.size.y, b.size.y);
            prop_assert!((a.size.x - b.size.x).abs() <= JITTER && (a.size.z - b.size.z).abs() <= JITTER);
            prop_assert!((a.pos.y - b.pos.y).abs() < 1e-12);
        }
    }

    #[test]
    fn nucleus_probabilities_sum_to_one(
        scores in prop::collection::vec(-5.0f64..5.0, 1..40),
        temperature in 0.01f64..3.0,
        top_p in 0.01f64..=1.0,
        top_k in 1usize..50,
    ) {
        let scored: Vec<ScoredAsset> =
            scores.iter().enumerate().map(|(i, &s)| ScoredAsset { jid: format!("a{i:02}"), score: s }).collect();
        let cfg = SamplerConfig { temperature, top_p, top_k, ..SamplerConfig::default() };
        let dist = filtered_distribution(&scored, &cfg).unwrap();
        let sum: f64 = dist.iter().map(|d| d.1).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert!(!dist.is_empty() && dist.len() <= top_k.min(scored.len()));
        prop_assert!(dist.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn advantages_are_standardized(rewards in prop::collection::vec(prop::sample::select(vec![-1.0, 0.0, 1.0]), 2..32)) {
        let adv = group_advantage(&rewards).unwrap();
        let n = adv.len() as f64;
        let mean = adv.iter().sum::<f64>() / n;
        let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        if rewards.iter().any(|&r| r != rewards[0]) {
            prop_assert!((var - 1.0).abs() < 1e-9);
        } else {
            prop_assert!(adv.iter().all(|&a| a == 0.0));
        }
    }

    #[test]
    fn candidate_parser_never_panics(text in ".{0,200}") {
        let _ = parse_candidate_object(&text);
        let _ = parse_commands(&text);
    }

    #[test]
    fn candidate_parser_handles_json_shapes(
        desc in "[a-z ]{1,20}",
        size in prop::collection::vec(-2.0f64..3.0, 0..5),
        drop_key in 0usize..5,
    ) {
        let mut obj = serde_json::json!({"desc": desc, "size": size, "pos": [0.0, 0.0, 0.0], "rot": [0.0, 0.0, 0.0, 1.0]});
        let keys = ["desc", "size", "pos", "rot"];
        if let Some(k) = keys.get(drop_key) {
            obj.as_object_mut().unwrap().remove(*k);
        }
        let parsed = parse_candidate_object(&obj.to_string());
        let well_formed = drop_key >= keys.len() && size.len() == 3 && size.iter().all(|&s| s > 0.0);
        prop_assert_eq!(parsed.is_ok(), well_formed, "{}", obj);
    }

    #[test]
    fn commands_round_trip(descs in prop::collection::vec(("[a-z]{1,8}( [a-z]{1,8}){0,3}", any::<bool>()), 1..6)) {
        let text: String = descs
            .iter()
            .map(|(d, add)| if *add { format!("<add>{d}</add>") } else { format!("<remove>{d}</remove>") })
            .collect::<Vec<_>>()
            .join(" ");
        let list = parse_commands(&text).unwrap();
        prop_assert_eq!(list.commands.len(), descs.len());
        let again = parse_commands(&render_commands(&list)).unwrap();
        prop_assert_eq!(again.commands, list.commands);
    }
}

#[test]
fn identity_quaternion_objects_round_trip_exactly() {
    let o = SceneObject::new(
        "x",
        Vec3::new(0.1, 0.2, 0.3),
        Vec3::new(1e-5, 0.0, -2.5),
        Quaternion::IDENTITY,
    );
    let scene = Scene::from_floor(
        ssrkit::ssr::RoomType::Bedroom,
        &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        2.5,
    )
    .with_objects(vec![o]);
    let text = serialize_ssr(&scene);
    assert_eq!(parse_ssr(&text).unwrap(), scene);
}
