use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use stormkit_core::effect::Effect;
use stormkit_core::kernel::{AgentSpec, BaseObject, Capabilities, PerceptorSpec, Runtime, SelectorFilter};
use stormkit_core::percept::BeliefUpdater;
use stormkit_core::react::Reaction;
use stormkit_core::CoreError;
use stormkit_logic::{parse_term, LogicModule, Term, BELIEFS};

fn sensor() -> BaseObject {
    BaseObject::new("sensor", "sensor").with_skill("read", 1, |a| match a[0].as_int() {
        Some(v) if v >= 0 => Ok(Term::int(v)),
        _ => Err(CoreError::failed("bad_reading")),
    })
}

fn watcher(alarms: Arc<AtomicUsize>, reactions: Vec<Reaction>) -> (AgentSpec, BaseObject) {
    let base = BaseObject::new("watcher", "agent").with_skill("alarm", 1, move |a| {
        if a[0].as_int() == Some(13) {
            return Err(CoreError::failed("unlucky"));
        }
        alarms.fetch_add(1, Ordering::SeqCst);
        Ok(Term::atom("rang"))
    });
    let situations = LogicModule::from_text(
        "situations",
        "situation(high, V) :- percept(read, [V], sensor), V > 10.\n\
         situation(reading, V) :- percept(read, [V], _).",
    )
    .unwrap();
    let caps = Capabilities { perception: true, reaction: true, ..Capabilities::none() };
    let mut spec = AgentSpec::new("watcher", caps).situations(situations).perceptor(
        PerceptorSpec::new("sensor", SelectorFilter::only(["read"])).handler(|| {
            Box::new(BeliefUpdater::new(|e: &stormkit_core::percept::PerceivedEvent| {
                vec![(parse_term("last(_)").unwrap(), vec![Term::compound("last", vec![e.result.clone().unwrap()])])]
            }))
        }),
    );
    for r in reactions {
        spec = spec.reaction(r);
    }
    (spec, base)
}

fn alarm() -> Reaction {
    Reaction::new("raise", "high", "alarm")
        .when("not(alarmed(V))")
        .with_args(vec![Term::var("V")])
        .then(Effect::assert("alarmed(V)"))
        .then(Effect::assert("said(Result)"))
}

#[test]
fn situation_fires_reaction_once_per_value() {
    let alarms = Arc::new(AtomicUsize::new(0));
    let mut rt = Runtime::new(2);
    let sensor_id = rt.add_object(sensor()).unwrap();
    let (spec, base) = watcher(Arc::clone(&alarms), vec![alarm()]);
    rt.create_agent(spec, base).unwrap();
    for v in [3, 12, 12, 4, 20] {
        rt.dispatcher.invoke(sensor_id, "read", &[Term::int(v)]).unwrap();
        rt.run_until_quiet(50);
    }
    assert_eq!(alarms.load(Ordering::SeqCst), 2);
    let h = rt.agent("watcher").unwrap();
    assert!(h.cx.holds(&parse_term("alarmed(12), alarmed(20), said(rang)").unwrap()).unwrap());
    assert!(!h.cx.holds(&parse_term("alarmed(3)").unwrap()).unwrap());
    assert!(h.cx.holds(&parse_term("last(20)").unwrap()).unwrap());
    assert_eq!(rt.trace.count("SituationDetected"), 5 + 3);
}

#[test]
fn failed_skills_apply_no_effects() {
    let alarms = Arc::new(AtomicUsize::new(0));
    let mut rt = Runtime::new(2);
    let sensor_id = rt.add_object(sensor()).unwrap();
    let (spec, base) = watcher(Arc::clone(&alarms), vec![alarm(), Reaction::new("log", "high", "alarm").with_args(vec![Term::int(1)])]);
    rt.create_agent(spec, base).unwrap();
    rt.dispatcher.invoke(sensor_id, "read", &[Term::int(13)]).unwrap();
    rt.run_until_quiet(50);
    let h = rt.agent("watcher").unwrap();
    assert!(!h.cx.holds(&parse_term("alarmed(13)").unwrap()).unwrap());
    // the second reaction still runs
    assert_eq!(alarms.load(Ordering::SeqCst), 1);
    assert_eq!(rt.trace.count("ActionFailed"), 1);
    assert_eq!(rt.trace.count("ActionExecuted"), 1);
}

#[test]
fn failed_invocations_do_not_update_beliefs() {
    let alarms = Arc::new(AtomicUsize::new(0));
    let mut rt = Runtime::new(2);
    let sensor_id = rt.add_object(sensor()).unwrap();
    let (spec, base) = watcher(alarms, vec![]);
    rt.create_agent(spec, base).unwrap();
    rt.dispatcher.invoke(sensor_id, "read", &[Term::int(5)]).unwrap();
    assert!(rt.dispatcher.invoke(sensor_id, "read", &[Term::int(-1)]).is_err());
    rt.run_until_quiet(50);
    let h = rt.agent("watcher").unwrap();
    let beliefs = h.mental_state().module(BELIEFS).unwrap().clauses().len();
    assert_eq!(beliefs, 1);
    assert!(h.cx.holds(&parse_term("last(5)").unwrap()).unwrap());
}

#[test]
fn messages_trigger_situations() {
    let mut rt = Runtime::new(8);
    let situations = LogicModule::from_text("situations", "situation(greeted, Who) :- percept(tell, [hello], Who).").unwrap();
    let caps = Capabilities { reaction: true, communication: true, ..Capabilities::none() };
    let count = Arc::new(AtomicUsize::new(0));
    let c = Arc::clone(&count);
    let base = BaseObject::new("host", "agent").with_skill("wave", 1, move |_| {
        c.fetch_add(1, Ordering::SeqCst);
        Ok(Term::void())
    });
    let spec = AgentSpec::new("host", caps)
        .situations(situations)
        .reaction(Reaction::new("wave_back", "greeted", "wave").with_args(vec![Term::var("Who")]));
    rt.create_agent(spec, base).unwrap();
    rt.create_agent(
        AgentSpec::new("guest", Capabilities { communication: true, ..Capabilities::none() }),
        BaseObject::new("guest", "agent"),
    )
    .unwrap();
    let guest = rt.agent("guest").unwrap();
    guest
        .cx
        .send(stormkit_core::comms::AclMessage::new(stormkit_core::comms::Performative::Tell, "guest", "host", Term::atom("hello")))
        .unwrap();
    rt.run_until_quiet(100);
    assert_eq!(count.load(Ordering::SeqCst), 1);
}
