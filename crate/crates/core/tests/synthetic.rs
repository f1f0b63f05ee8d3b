//! Event-simulator contracts: the threshold detector is checked against hand
//! computations of the crossing rule, the renderer against a disc-membership
//! oracle, and whole datasets for determinism, locality, and label truth.

use mambapupil_core::synth::*;

/// Scene with no iris ring so only the pupil disc marks the frame.
fn plain_scene() -> SceneModel {
    SceneModel {
        resolution: (48, 36),
        background: 1.0,
        pupil_radius: 5.0,
        pupil_contrast: 0.8,
        iris_ring: None,
        threshold: 0.2,
        noise_rate_hz: 0.0,
    }
}

fn flat(scene: &SceneModel, v: f64) -> Vec<f64> {
    let (w, h) = (scene.resolution.0 as usize, scene.resolution.1 as usize);
    vec![v; w * h]
}

/// A +2.5C step fires exactly floor(2.5) = 2 positive events; the crossing
/// times interpolate linearly: k*C/|delta| of the interval, so 400 and 800.
#[test]
fn step_of_two_and_a_half_thresholds_fires_two_events() {
    let scene = plain_scene();
    let c = scene.threshold;
    let mut lo = flat(&scene, 0.0);
    let mut hi = flat(&scene, 0.0);
    lo[0] = 0.0;
    hi[0] = 2.5 * c;
    let stream = emit_events(&scene, &[(0, lo), (1_000, hi)]);
    assert_eq!(stream.events.len(), 2);
    for e in &stream.events {
        assert_eq!((e.x, e.y, e.p), (0, 0, 1));
    }
    assert_eq!(stream.events[0].t, 400);
    assert_eq!(stream.events[1].t, 800);
}

#[test]
fn sub_threshold_step_fires_nothing() {
    let scene = plain_scene();
    let c = scene.threshold;
    let mut hi = flat(&scene, 0.0);
    hi[5] = 0.9 * c;
    let stream = emit_events(&scene, &[(0, flat(&scene, 0.0)), (1_000, hi)]);
    assert!(stream.events.is_empty());
}

#[test]
fn negative_step_fires_negative_polarity() {
    let scene = plain_scene();
    let c = scene.threshold;
    let mut lo = flat(&scene, 1.0);
    lo[7] = 1.0 - 3.2 * c;
    let stream = emit_events(&scene, &[(0, flat(&scene, 1.0)), (1_000, lo)]);
    assert_eq!(stream.events.len(), 3);
    assert!(stream.events.iter().all(|e| e.p == -1 && e.x == 7 && e.y == 0));
}

/// The residual keeps the unexpended 0.5C: holding the value steady after a
/// +2.5C step fires nothing further.
#[test]
fn residual_carries_across_frames() {
    let scene = plain_scene();
    let c = scene.threshold;
    let mut hi = flat(&scene, 0.0);
    hi[0] = 2.5 * c;
    let stream = emit_events(
        &scene,
        &[(0, flat(&scene, 0.0)), (1_000, hi.clone()), (2_000, hi.clone()), (3_000, hi)],
    );
    assert_eq!(stream.events.len(), 2, "steady value must not re-fire");
    // But nudging up by another 0.5C tops the residual over one threshold.
    let mut hi2 = flat(&scene, 0.0);
    hi2[0] = 2.5 * scene.threshold;
    let mut hi3 = hi2.clone();
    hi3[0] = 3.0 * scene.threshold;
    let s2 = emit_events(&scene, &[(0, flat(&scene, 0.0)), (1_000, hi2), (2_000, hi3)]);
    assert_eq!(s2.events.len(), 3);
}

#[test]
fn static_scene_emits_no_events() {
    let scene = plain_scene();
    let frame = render_log_intensity(&scene, (24.0, 18.0), 0.0);
    let frames: Vec<(i64, Vec<f64>)> =
        (0..5).map(|k| (k * 1_000, frame.clone())).collect();
    assert!(emit_events(&scene, &frames).events.is_empty());
}

#[test]
fn first_frame_only_seeds_the_reference() {
    let scene = plain_scene();
    // A wild first frame fires nothing by itself.
    let stream = emit_events(&scene, &[(0, flat(&scene, 123.0))]);
    assert!(stream.events.is_empty());
}

/// The rendered pupil is exactly the set of pixels whose centers fall inside
/// the disc; everything else stays at the background level.
#[test]
fn render_matches_disc_membership_oracle() {
    let scene = plain_scene();
    let (w, h) = (scene.resolution.0 as usize, scene.resolution.1 as usize);
    let center = (20.3, 17.8);
    let grid = render_log_intensity(&scene, center, 0.0);
    let r2 = scene.pupil_radius * scene.pupil_radius;
    let mut inside = 0;
    for y in 0..h {
        for x in 0..w {
            let d2 = (x as f64 + 0.5 - center.0).powi(2) + (y as f64 + 0.5 - center.1).powi(2);
            let expect = if d2 <= r2 {
                scene.background - scene.pupil_contrast
            } else {
                scene.background
            };
            assert_eq!(grid[y * w + x], expect, "pixel ({x},{y})");
            inside += usize::from(d2 <= r2);
        }
    }
    assert!(inside > 0, "the disc must cover at least one pixel center");
}

#[test]
fn render_iris_ring_sits_between_pupil_and_background() {
    let scene = SceneModel { iris_ring: Some((9.0, 0.3)), ..plain_scene() };
    let grid = render_log_intensity(&scene, (24.0, 18.0), 0.0);
    let w = scene.resolution.0 as usize;
    // Walk right from the center: pupil level, then ring level, then background.
    let row = 17usize;
    let levels: Vec<f64> = (24..48).map(|x| grid[row * w + x]).collect();
    assert!(levels.contains(&(1.0 - 0.8)), "pupil level present");
    assert!(levels.contains(&(1.0 - 0.3)), "ring level present");
    assert!(levels.contains(&1.0), "background present");
}

#[test]
fn full_eyelid_closure_renders_uniform_background() {
    let scene = plain_scene();
    let grid = render_log_intensity(&scene, (24.0, 18.0), 1.0);
    assert!(grid.iter().all(|&v| v == scene.background));
}

#[test]
fn half_eyelid_covers_the_top_rows() {
    let scene = plain_scene();
    // Pupil near the top so the lid at 0.5 hides it entirely.
    let grid = render_log_intensity(&scene, (24.0, 8.0), 0.5);
    let (w, h) = (scene.resolution.0 as usize, scene.resolution.1 as usize);
    let lid_rows = h / 2;
    for y in 0..lid_rows {
        for x in 0..w {
            assert_eq!(grid[y * w + x], scene.background, "row {y} under the lid");
        }
    }
}

#[test]
fn generate_dataset_is_deterministic() {
    let scene = SceneModel { noise_rate_hz: 500.0, ..plain_scene() };
    let trajs = vec![
        Trajectory {
            duration_us: 200_000,
            motion: Motion::Random { center: (24.0, 18.0), amplitude: 8.0, hops: 4 },
        },
        Trajectory {
            duration_us: 100_000,
            motion: Motion::Fixation { center: (20.0, 18.0) },
        },
    ];
    let (ev_a, lb_a) = generate_dataset(&trajs, &scene, 100, 42);
    let (ev_b, lb_b) = generate_dataset(&trajs, &scene, 100, 42);
    assert_eq!(ev_a, ev_b, "equal seeds, equal events");
    assert_eq!(lb_a, lb_b, "equal seeds, equal labels");
    let (ev_c, _) = generate_dataset(&trajs, &scene, 100, 43);
    assert_ne!(ev_a, ev_c, "noise and random motion must vary with the seed");
}

#[test]
fn events_are_sorted_and_in_bounds() {
    let scene = SceneModel { noise_rate_hz: 2_000.0, ..plain_scene() };
    let trajs = vec![Trajectory {
        duration_us: 300_000,
        motion: Motion::SmoothPursuit { from: (10.0, 10.0), to: (38.0, 26.0) },
    }];
    let (stream, _) = generate_dataset(&trajs, &scene, 100, 7);
    assert!(!stream.events.is_empty());
    let (w, h) = scene.resolution;
    let mut prev = i64::MIN;
    for e in &stream.events {
        assert!(e.t >= prev, "events must be time-sorted");
        assert!(e.x < w && e.y < h, "event inside the sensor");
        assert!(e.p == 1 || e.p == -1);
        prev = e.t;
    }
}

/// Without noise or blinks, every event lies near the interpolated pupil
/// boundary at its own timestamp.
#[test]
fn events_cluster_around_the_moving_pupil() {
    let scene = plain_scene();
    let (from, to) = ((10.0, 12.0), (38.0, 24.0));
    let duration = 400_000i64;
    let trajs = vec![Trajectory {
        duration_us: duration,
        motion: Motion::SmoothPursuit { from, to },
    }];
    let (stream, _) = generate_dataset(&trajs, &scene, 100, 0);
    assert!(stream.events.len() > 100, "pursuit should fire plenty of events");
    let margin = scene.pupil_radius + 2.0;
    for e in &stream.events {
        let u = e.t as f64 / duration as f64;
        let cx = from.0 + (to.0 - from.0) * u;
        let cy = from.1 + (to.1 - from.1) * u;
        let d = ((f64::from(e.x) + 0.5 - cx).powi(2) + (f64::from(e.y) + 0.5 - cy).powi(2)).sqrt();
        assert!(
            d <= margin,
            "event at ({},{}) t={} lies {d:.2} px from the center, margin {margin}",
            e.x,
            e.y,
            e.t
        );
    }
}

#[test]
fn fixation_emits_nothing_and_labels_stay_constant() {
    let scene = plain_scene();
    let trajs = vec![Trajectory {
        duration_us: 200_000,
        motion: Motion::Fixation { center: (24.0, 18.0) },
    }];
    let (stream, track) = generate_dataset(&trajs, &scene, 100, 0);
    assert!(stream.events.is_empty());
    assert_eq!(track.samples.len(), 21, "0..=200ms at 100 Hz");
    for s in &track.samples {
        assert_eq!((s.cx, s.cy), (24.0 / 48.0, 18.0 / 36.0));
        assert!(!s.closed);
    }
}

#[test]
fn labels_land_on_the_exact_rate_grid() {
    let scene = plain_scene();
    let trajs = vec![Trajectory {
        duration_us: 1_000_000,
        motion: Motion::Fixation { center: (24.0, 18.0) },
    }];
    let (_, track) = generate_dataset(&trajs, &scene, 200, 0);
    assert_eq!(track.rate_hz, 200);
    assert_eq!(track.samples.len(), 201);
    for (i, s) in track.samples.iter().enumerate() {
        assert_eq!(s.t, i as i64 * 5_000);
    }
}

#[test]
fn pursuit_labels_move_monotonically() {
    let scene = plain_scene();
    let trajs = vec![Trajectory {
        duration_us: 500_000,
        motion: Motion::SmoothPursuit { from: (8.0, 18.0), to: (40.0, 18.0) },
    }];
    let (_, track) = generate_dataset(&trajs, &scene, 100, 0);
    for pair in track.samples.windows(2) {
        assert!(pair[1].cx > pair[0].cx, "cx must increase along the pursuit");
        assert_eq!(pair[1].cy, pair[0].cy);
    }
}

/// A blink drives a burst of events (lid wiping the pupil) and flags the
/// closed samples in the labels; a fixation of the same length stays silent.
#[test]
fn blink_bursts_and_marks_closed_labels() {
    let scene = plain_scene();
    let blink = vec![Trajectory {
        duration_us: 300_000,
        motion: Motion::Blink { center: (24.0, 18.0), close: 0.3, open: 0.7 },
    }];
    let fixation = vec![Trajectory {
        duration_us: 300_000,
        motion: Motion::Fixation { center: (24.0, 18.0) },
    }];
    let (ev_blink, lb_blink) = generate_dataset(&blink, &scene, 100, 0);
    let (ev_fix, _) = generate_dataset(&fixation, &scene, 100, 0);
    assert!(ev_fix.events.is_empty());
    assert!(
        ev_blink.events.len() >= 10,
        "the lid sweep should fire a burst, got {}",
        ev_blink.events.len()
    );
    let closed: Vec<bool> = lb_blink.samples.iter().map(|s| s.closed).collect();
    assert!(closed[closed.len() / 2], "mid-blink samples are closed");
    assert!(!closed[0] && !closed[closed.len() - 1], "endpoints are open");
}

/// Saccade easing: starts and ends at the endpoints, passes the midpoint at
/// u=0.5, and moves faster mid-flight than near the ends.
#[test]
fn saccade_eases_in_and_out() {
    let scene = plain_scene();
    let tr = Trajectory {
        duration_us: 100_000,
        motion: Motion::Saccade { from: (10.0, 18.0), to: (38.0, 18.0) },
    };
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let r = tr.realize(&scene, &mut rng);
    assert_eq!(r.position(0.0), (10.0, 18.0));
    assert_eq!(r.position(1.0), (38.0, 18.0));
    let mid = r.position(0.5);
    assert!((mid.0 - 24.0).abs() < 1e-12);
    let early = r.position(0.1).0 - r.position(0.0).0;
    let center = r.position(0.55).0 - r.position(0.45).0;
    assert!(center > 3.0 * early, "smoothstep concentrates speed mid-flight");
}

#[test]
fn random_walk_stays_inside_the_frame() {
    let scene = plain_scene();
    let trajs = vec![Trajectory {
        duration_us: 400_000,
        motion: Motion::Random { center: (24.0, 18.0), amplitude: 30.0, hops: 16 },
    }];
    let (_, track) = generate_dataset(&trajs, &scene, 100, 9);
    for s in &track.samples {
        assert!((0.0..=1.0).contains(&s.cx) && (0.0..=1.0).contains(&s.cy));
    }
}

#[test]
fn noise_events_appear_on_an_otherwise_silent_scene() {
    let quiet = plain_scene();
    let noisy = SceneModel { noise_rate_hz: 1_000.0, ..plain_scene() };
    let trajs = vec![Trajectory {
        duration_us: 1_000_000,
        motion: Motion::Fixation { center: (24.0, 18.0) },
    }];
    let (ev_q, _) = generate_dataset(&trajs, &quiet, 100, 3);
    let (ev_n, _) = generate_dataset(&trajs, &noisy, 100, 3);
    assert!(ev_q.events.is_empty());
    // Poisson(1000 Hz * 1 s): hugely unlikely to land far from 1000.
    let n = ev_n.events.len();
    assert!((700..=1300).contains(&n), "expected ~1000 noise events, got {n}");
}

#[test]
fn mixed_trajectories_tile_the_requested_duration() {
    let scene = plain_scene();
    let trajs = mixed_trajectories(&scene, 1_500_000);
    assert!(!trajs.is_empty());
    let total: i64 = trajs.iter().map(|t| t.duration_us).sum();
    assert!(total >= 1_500_000, "legs must cover the request");
    for t in &trajs {
        assert_eq!(t.duration_us % FRAME_DT_US, 0, "whole milliseconds per leg");
        t.validate(&scene).unwrap();
    }
    let kinds: std::collections::BTreeSet<&str> = trajs
        .iter()
        .map(|t| match t.motion {
            Motion::Fixation { .. } => "fixation",
            Motion::Saccade { .. } => "saccade",
            Motion::SmoothPursuit { .. } => "pursuit",
            Motion::Blink { .. } => "blink",
            Motion::Random { .. } => "random",
        })
        .collect();
    assert_eq!(kinds.len(), 5, "the mixed preset exercises every motion kind");
}

#[test]
fn event_timestamps_stay_inside_their_frame_interval() {
    let scene = plain_scene();
    let c = scene.threshold;
    let mut hi = flat(&scene, 0.0);
    // Enormous jump: all crossings round to the interval end, the clamp pulls
    // them back to t-1.
    hi[0] = 100.0 * c;
    let stream = emit_events(&scene, &[(0, flat(&scene, 0.0)), (1_000, hi)]);
    assert_eq!(stream.events.len(), 100);
    assert!(stream.events.iter().all(|e| (0..1_000).contains(&e.t)));
}

/// Event builds a `LabelSample.closed` from the exact eyelid, not the frame
/// grid: closure fraction 0.5 maps to closed=true at exactly eyelid >= 0.5.
#[test]
fn closed_flag_trips_at_half_closure() {
    let scene = plain_scene();
    let tr = Trajectory {
        duration_us: 100_000,
        motion: Motion::Blink { center: (24.0, 18.0), close: 0.5, open: 0.5 },
    };
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let r = tr.realize(&scene, &mut rng);
    // Linear ramp up over [0, 0.5]: eyelid(0.25) = 0.5 exactly.
    assert!((r.eyelid(0.25) - 0.5).abs() < 1e-12);
    assert!(r.eyelid(0.1) < 0.5 && r.eyelid(0.5) > 0.99);
}
