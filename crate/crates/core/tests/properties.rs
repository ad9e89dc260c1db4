mod support;

use std::collections::BTreeSet;

use meronym_core::corpus::CorpusSnapshot;
use meronym_core::ids::AuthorId;
use meronym_core::meronym::{anonymity_set, signal_match_set, Meronym, SeniorityLookup};
use meronym_core::scenario::demo_corpus;
use meronym_core::signals::{
    citation_bucket, derive_endorser_signals, derive_self_signals, render_signal, EndorserGrant, IdentitySignal,
    Persona, RelationshipCategory, Seniority, SignalKind, SignalPayload, Subject,
};
use meronym_core::ServiceConfig;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{enabled_user, manual_service, nearest_rung, random_corpus, Oracle};

fn corpus(seed: u64, n: usize) -> (support::RawCorpus, CorpusSnapshot) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = random_corpus(&mut rng, n, false);
    let snapshot = raw.snapshot();
    (raw, snapshot)
}

fn persona_for(snapshot: &CorpusSnapshot, id: &AuthorId, seniority: Seniority) -> Persona {
    let a = snapshot.author(id).unwrap();
    Persona {
        full_name: a.full_name.clone(),
        handle: a.handle.clone().unwrap_or_else(|| "@nobody".into()),
        seniority,
        author_id: Some(id.clone()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn citation_graph_is_symmetric_and_conserved(seed in any::<u64>(), n in 2usize..120) {
        let (raw, snapshot) = corpus(seed, n);
        let mut total_incoming = 0u64;
        for a in snapshot.authors() {
            let m = snapshot.author_metrics(&a.author_id).unwrap();
            total_incoming += m.citation_count;
            for b in &m.cited_author_ids {
                let mb = snapshot.author_metrics(b).unwrap();
                prop_assert!(mb.citing_author_ids.contains(&a.author_id));
            }
            for b in &m.coauthor_ids {
                prop_assert!(snapshot.author_metrics(b).unwrap().coauthor_ids.contains(&a.author_id));
            }
            prop_assert!(!m.coauthor_ids.contains(&a.author_id));
        }
        // Every citation edge is credited once to each author of the cited paper.
        let expected: u64 = raw
            .publications
            .iter()
            .flat_map(|p| p.cites.iter())
            .map(|c| raw.publications.iter().find(|p| &p.pub_id == c).unwrap().author_ids.len() as u64)
            .sum();
        prop_assert_eq!(total_incoming, expected);
    }

    #[test]
    fn citation_bucket_is_nearest_rung(count in 0u64..10_000_000) {
        prop_assert_eq!(citation_bucket(count), nearest_rung(count));
    }

    #[test]
    fn rendering_is_injective(seed in any::<u64>()) {
        let (raw, snapshot) = corpus(seed, 60);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let target = &raw.authors.choose(&mut rng).unwrap().author_id;
        let persona = persona_for(&snapshot, target, Seniority::Junior);
        let endorser = &raw.authors.choose(&mut rng).unwrap().author_id;
        let grant = EndorserGrant {
            endorser: persona_for(&snapshot, endorser, Seniority::Senior),
            relationship: *RelationshipCategory::ALL.choose(&mut rng).unwrap(),
            name_reveal_allowed: true,
            endorsee_author_id: Some(target.clone()),
            endorsee_name: persona.full_name.clone(),
        };
        let mut signals = derive_self_signals(&snapshot, &persona).unwrap();
        if endorser != target {
            signals.extend(derive_endorser_signals(&snapshot, Some(&grant)).unwrap());
        }
        let unique: BTreeSet<&IdentitySignal> = signals.iter().collect();
        let rendered: BTreeSet<String> = unique.iter().map(|s| render_signal(s)).collect();
        prop_assert_eq!(rendered.len(), unique.len());
    }

    #[test]
    fn adding_a_signal_never_grows_the_set(seed in any::<u64>()) {
        let (raw, snapshot) = corpus(seed, 150);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let lookup = SeniorityLookup::suggested_only(2024);
        let target = &raw.authors.choose(&mut rng).unwrap().author_id;
        let mut pool = derive_self_signals(&snapshot, &persona_for(&snapshot, target, Seniority::Junior)).unwrap();
        pool.shuffle(&mut rng);
        let mut previous = anonymity_set(&snapshot, &lookup, &[]);
        for end in 1..=pool.len().min(6) {
            let current = anonymity_set(&snapshot, &lookup, &pool[..end]);
            prop_assert!(current.is_subset(&previous));
            previous = current;
        }
    }

    #[test]
    fn poster_is_in_own_match_sets(seed in any::<u64>()) {
        let (raw, snapshot) = corpus(seed, 80);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let target = &raw.authors.choose(&mut rng).unwrap().author_id;
        let seniority = if rng.gen_bool(0.5) { Seniority::Senior } else { Seniority::Junior };
        let lookup = SeniorityLookup {
            declared: [(target.clone(), seniority)].into_iter().collect(),
            reference_year: 2024,
        };
        for signal in derive_self_signals(&snapshot, &persona_for(&snapshot, target, seniority)).unwrap() {
            prop_assert!(
                signal_match_set(&snapshot, &lookup, &signal).contains(target),
                "{} excludes its own author", signal.render()
            );
        }
        let all = derive_self_signals(&snapshot, &persona_for(&snapshot, target, seniority)).unwrap();
        prop_assert!(anonymity_set(&snapshot, &lookup, &all).contains(target));
    }

    #[test]
    fn oracle_agrees_on_single_signals(seed in any::<u64>()) {
        let (raw, snapshot) = corpus(seed, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let lookup = SeniorityLookup::suggested_only(2024);
        let oracle = Oracle::new(&raw, Default::default(), 2024);
        let target = &raw.authors.choose(&mut rng).unwrap().author_id;
        for signal in derive_self_signals(&snapshot, &persona_for(&snapshot, target, Seniority::Junior)).unwrap() {
            for s in [signal.clone(), IdentitySignal { subject: Subject::Endorser, payload: signal.payload.clone() }] {
                prop_assert_eq!(signal_match_set(&snapshot, &lookup, &s).len(), oracle.count(std::slice::from_ref(&s)));
            }
        }
    }

    #[test]
    fn endorser_name_offered_iff_allowed(reveal in any::<bool>(), rel in 0usize..4) {
        let snapshot = demo_corpus();
        let grant = EndorserGrant {
            endorser: persona_for(&snapshot, &AuthorId::new("a02"), Seniority::Senior),
            relationship: RelationshipCategory::ALL[rel],
            name_reveal_allowed: reveal,
            endorsee_author_id: Some(AuthorId::new("a01")),
            endorsee_name: "Alice Liddell".into(),
        };
        let signals = derive_endorser_signals(&snapshot, Some(&grant)).unwrap();
        let named = signals.iter().any(|s| s.subject == Subject::Endorser && s.kind() == SignalKind::Name);
        prop_assert_eq!(named, reveal);
        // The endorsee is never listed among the endorser's coauthors.
        prop_assert!(signals.iter().all(|s| !s.render().contains("Alice Liddell")));
    }
}

#[test]
fn claim_only_adds_self_signals() {
    let (svc, _) = manual_service(demo_corpus(), ServiceConfig::default());
    let reg = svc.register("Harry Potter", "@harry_potter", None, Seniority::Junior).unwrap();
    let user = reg.account.user_id.clone();
    svc.verify(&user, &reg.verification_token).unwrap();
    let before: BTreeSet<IdentitySignal> = svc.self_signals(&user).unwrap().into_iter().collect();
    svc.claim(&user, "a09").unwrap();
    let pending: BTreeSet<IdentitySignal> = svc.self_signals(&user).unwrap().into_iter().collect();
    assert_eq!(before, pending, "a pending claim grants nothing");
    svc.approve_claim(&user).unwrap();
    let after: BTreeSet<IdentitySignal> = svc.self_signals(&user).unwrap().into_iter().collect();
    assert!(after.is_superset(&before));
    assert!(after.len() > before.len());
}

#[test]
fn relational_signals_never_compose_publicly() {
    let (svc, _) = manual_service(demo_corpus(), ServiceConfig::default());
    let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", Some(&AuthorId::new("a01")), Seniority::Junior);
    let relational = svc.relational_signals(&alice, "a02").unwrap();
    assert!(!relational.is_empty());
    for signal in relational {
        let err = svc.compose(&alice, std::slice::from_ref(&signal)).unwrap_err();
        assert_eq!(err.code(), "RelationalSignalInPublicMeronym");
    }
}

#[test]
fn meronym_order_is_catalog_order() {
    let a = IdentitySignal::endorser(SignalPayload::VenueHistory { venue: "CHI".into() });
    let b = IdentitySignal::poster(SignalPayload::Seniority { level: Seniority::Junior });
    let c = IdentitySignal::poster(SignalPayload::Affiliation { institution: "MIT".into() });
    let m = Meronym::compose(&[a.clone(), b.clone(), c.clone()], &[a, b, c]).unwrap();
    let kinds: Vec<(Subject, SignalKind)> = m.signals().iter().map(|s| (s.subject, s.kind())).collect();
    assert_eq!(
        kinds,
        [
            (Subject::Poster, SignalKind::Affiliation),
            (Subject::Poster, SignalKind::Seniority),
            (Subject::Endorser, SignalKind::VenueHistory),
        ]
    );
}
