mod common;

use proptest::prelude::*;

use mtplan::bridge::{decode, escape, serve_session, unescape, AgentTransport, BridgeConfig, ScriptedAgent, Tag};
use mtplan::dsl::{parse_recipe, render_recipe, RenderMode};
use mtplan::interchange::{instance_from_str, instance_to_string};
use mtplan::metrics::{efficiency, evaluate, relative_efficiency, PrefixOrder};
use mtplan::sched::{check_plan, heuristic_schedule, optimal_schedule, Limits, Plan};
use mtplan::sim::{FailureReason, Outcome, SessionConfig, SimState};
use mtplan::{fixtures, Timestamp};

use common::{random_instance, random_transcript, replay_lines};

fn bundled_index() -> impl Strategy<Value = usize> {
    0..fixtures::bundled_instances().len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn efficiency_stays_in_unit_interval(seed in any::<u64>(), idx in bundled_index(), synthetic in any::<bool>()) {
        let inst = if synthetic {
            random_instance(seed, 12)
        } else {
            fixtures::bundled_instances().swap_remove(idx)
        };
        let t = random_transcript(&inst, seed);
        let e = efficiency(&t);
        prop_assert!((0.0..=1.0).contains(&e.efficiency));
        prop_assert!(e.t_save <= e.t_auto);
    }

    #[test]
    fn recipes_round_trip_through_the_document_format(seed in any::<u64>()) {
        for recipe in random_instance(seed, 12).recipes {
            let text = render_recipe(&recipe, RenderMode::Full);
            prop_assert_eq!(parse_recipe(&text).unwrap(), recipe);
        }
    }

    #[test]
    fn instances_round_trip_through_json(seed in any::<u64>()) {
        let inst = random_instance(seed, 12);
        prop_assert_eq!(instance_from_str(&instance_to_string(&inst)).unwrap(), inst);
    }

    #[test]
    fn masked_documents_hide_concurrency_and_resources(seed in any::<u64>()) {
        for recipe in random_instance(seed, 12).recipes {
            let text = render_recipe(&recipe, RenderMode::Masked);
            prop_assert!(!text.contains("Autonomous actions"));
            prop_assert!(!text.contains("require"));
        }
    }

    #[test]
    fn escaping_is_lossless_and_single_line(s in ".*") {
        let e = escape(&s);
        prop_assert!(!e.contains('\n'));
        prop_assert_eq!(unescape(&e), s);
    }

    #[test]
    fn invalid_commands_abort_at_the_revision_limit(n in 1usize..25, limit in 1u32..15) {
        let config = SessionConfig { max_revisions: limit, ..SessionConfig::default() };
        let mut st = SimState::new(fixtures::instance(&["Tea"]).unwrap(), config).unwrap();
        for i in 1..=n {
            if st.outcome() != Outcome::Pending {
                break;
            }
            st.apply_line(&format!("Step({}, Tea, 1 min, 00:00:00)", 10 + i)).unwrap();
            let want = if i as u32 >= limit {
                Outcome::Failure(FailureReason::MaxRevisions)
            } else {
                Outcome::Pending
            };
            prop_assert_eq!(st.outcome(), want);
        }
        prop_assert_eq!(st.revision_count(), (n as u32).min(limit));
    }

    #[test]
    fn repeated_rejections_abort_at_the_repeat_limit(limit in 1u32..6, step in 0usize..4) {
        let config = SessionConfig { repeat_limit: limit, ..SessionConfig::default() };
        let mut st = SimState::new(fixtures::instance(&["Tea"]).unwrap(), config).unwrap();
        // Zero execution time is always rejected.
        let line = format!("Step({step}, Tea, 0 min, 00:00:00)");
        for i in 1..=limit {
            st.apply_line(&line).unwrap();
            let want = if i == limit {
                Outcome::Failure(FailureReason::RepeatLoop)
            } else {
                Outcome::Pending
            };
            prop_assert_eq!(st.outcome(), want);
        }
    }

    #[test]
    fn deadline_is_checked_on_the_first_late_advance(at in 360u32..900) {
        // Tea: step 0 ends at 6 min and step 2 must start within 1 min.
        let mut st = SimState::new(fixtures::instance(&["Tea"]).unwrap(), SessionConfig::default()).unwrap();
        st.apply_line("Step(0, Tea, 00:06:00, 00:00:00)").unwrap();
        st.apply_line("Step(1, Tea, 00:02:00, 00:00:00)").unwrap();
        let fb = st
            .apply_line(&format!("Step(2, Tea, 00:04:00, {})", Timestamp::from_secs(at).padded()))
            .unwrap();
        if at > 420 {
            prop_assert_eq!(st.outcome(), Outcome::Failure(FailureReason::TimeConstraintViolation));
            let succ = mtplan::ActionRef { recipe: 0, step: 2 };
            prop_assert!(!st.progress(succ).started());
            prop_assert!(fb.message.contains("Step 0 and Step 2 in Recipe Tea"));
        } else {
            prop_assert_eq!(st.outcome(), Outcome::Pending);
        }
    }

    #[test]
    fn bridge_answers_every_line_once(seed in any::<u64>(), idx in bundled_index(), hints in any::<bool>()) {
        let inst = fixtures::bundled_instances().swap_remove(idx);
        let t = random_transcript(&inst, seed);
        let lines: Vec<String> = t.entries.iter().map(|e| e.command.clone()).collect();
        let mut config = BridgeConfig::default();
        config.session.hints = hints;
        let mut transport = AgentTransport::new(ScriptedAgent::new(lines.clone()));
        let result = serve_session(&inst, &config, &mut transport, None).unwrap();
        let tags: Vec<Tag> = transport.received.iter().map(|l| decode(l).unwrap().0).collect();
        let header = 1 + inst.recipes.len();
        prop_assert!(tags[..header].iter().all(|t| *t == Tag::Task));
        prop_assert_eq!(tags[header], Tag::Obs);
        prop_assert_eq!(*tags.last().unwrap(), Tag::End);
        let replies = tags[header + 1..tags.len() - 1].iter().filter(|t| matches!(t, Tag::Obs | Tag::Err)).count();
        prop_assert_eq!(replies, result.transcript.entries.len());
        if !hints {
            prop_assert!(!tags.contains(&Tag::Hint));
        }

        // Offline replay of the same lines agrees.
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let mut offline = replay_lines(&inst, &refs);
        if offline.outcome == Outcome::Pending {
            offline.outcome = Outcome::Failure(FailureReason::AgentAborted);
        }
        prop_assert_eq!(offline.outcome, result.transcript.outcome);
        prop_assert_eq!(&offline.timeline, &result.transcript.timeline);
        if let (Ok(reference), Some(report)) = (heuristic_schedule(&inst, true), result.report) {
            let again = evaluate(&inst, &offline, &reference, PrefixOrder::Completion).unwrap();
            prop_assert_eq!(again, report);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schedulers_are_deterministic(seed in any::<u64>()) {
        let inst = random_instance(seed, 12);
        prop_assert_eq!(heuristic_schedule(&inst, true), heuristic_schedule(&inst, true));
        prop_assert_eq!(heuristic_schedule(&inst, false), heuristic_schedule(&inst, false));
    }

    #[test]
    fn relaxing_time_constraints_never_lengthens_the_heuristic_plan(seed in any::<u64>()) {
        let inst = random_instance(seed, 12);
        if let Ok(strict) = heuristic_schedule(&inst, true) {
            let relaxed = heuristic_schedule(&inst, false).unwrap();
            prop_assert!(relaxed.makespan <= strict.makespan);
            let (outcome, _) = check_plan(&inst.without_time_constraints(), &relaxed).unwrap();
            prop_assert_eq!(outcome, Outcome::Success);
        }
    }

    #[test]
    fn heuristic_plans_check_and_score_one_against_themselves(seed in any::<u64>()) {
        let inst = random_instance(seed, 12);
        if let Ok(plan) = heuristic_schedule(&inst, true) {
            let (outcome, t) = check_plan(&inst, &plan).unwrap();
            prop_assert_eq!(outcome, Outcome::Success);
            prop_assert_eq!(t.final_clock() - Timestamp::ZERO, plan.makespan);
            let rel = relative_efficiency(&inst, &t, &plan, PrefixOrder::Completion).unwrap();
            prop_assert_eq!(rel.ratio, 1.0);
            prop_assert_eq!(Plan::parse(&plan.render()).unwrap(), plan);
        }
    }

    #[test]
    fn optimal_never_exceeds_heuristic(seed in any::<u64>()) {
        let inst = random_instance(seed, 9);
        match (optimal_schedule(&inst, Limits::default()), heuristic_schedule(&inst, true)) {
            (Ok(o), Ok(h)) => {
                prop_assert!(o.makespan <= h.makespan);
                prop_assert_eq!(check_plan(&inst, &o).unwrap().0, Outcome::Success);
            }
            (Err(e), Ok(_)) => prop_assert!(false, "optimal failed where heuristic succeeded: {}", e),
            _ => {}
        }
    }
}
