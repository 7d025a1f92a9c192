use stormkit_core::comms::Performative;
use stormkit_core::conv::{replay, ConvRule, ConversationClass, MessageTemplate, Recipients};
use stormkit_core::kernel::{AgentSpec, BaseObject, Capabilities, Runtime};
use stormkit_core::CoreError;
use stormkit_logic::{parse_term, Term};

fn ping() -> ConversationClass {
    ConversationClass::new(
        "ping",
        &["start", "waiting", "done", "refused"],
        "start",
        &["done", "refused"],
        vec![
            ConvRule::new("open", "start", "waiting")
                .such_that("event(start), serial(N)")
                .before(|h| {
                    let n = h.local("N").cloned().expect("bound by the guard");
                    h.set("Serial", n);
                    Ok(())
                })
                .send(MessageTemplate::new(Performative::Tell, Recipients::Peers, "ping(N)")),
            ConvRule::new("answered", "waiting", "done")
                .such_that("event(message(tell, P, pong(Serial))), peer(P)")
                .after(|h| h.assert("beliefs", parse_term("answered").unwrap())),
            ConvRule::new("refused", "waiting", "refused").such_that("event(message(sorry, _, _))"),
        ],
    )
    .unwrap()
}

fn pong() -> ConversationClass {
    ConversationClass::new(
        "pong",
        &["idle", "served"],
        "idle",
        &["served"],
        vec![ConvRule::new("serve", "idle", "served").such_that("event(message(tell, P, ping(N)))").send(MessageTemplate::new(
            Performative::Tell,
            Recipients::Term(Term::var("P")),
            "pong(N)",
        ))],
    )
    .unwrap()
}

fn runtime() -> Runtime {
    let mut rt = Runtime::new(17);
    rt.register_class(ping()).unwrap();
    rt.register_class(pong()).unwrap();
    let comm = Capabilities { communication: true, ..Capabilities::none() };
    let a = AgentSpec::new("a", comm).conversation("ping").module(stormkit_logic::LogicModule::from_text("beliefs", "serial(7).").unwrap());
    rt.create_agent(a, BaseObject::new("a", "agent")).unwrap();
    rt.create_agent(AgentSpec::new("b", comm).conversation("pong"), BaseObject::new("b", "agent")).unwrap();
    rt
}

fn log(rt: &Runtime, agent: &str, id: &str) -> Vec<(String, String, String)> {
    let inst = rt.agent(agent).unwrap().conversation(id).unwrap();
    inst.history.iter().map(|t| (t.rule.clone(), t.from.clone(), t.to.clone())).collect()
}

fn triple(r: &str, f: &str, t: &str) -> (String, String, String) {
    (r.into(), f.into(), t.into())
}

#[test]
fn happy_path() {
    let mut rt = runtime();
    let server = rt.spawn_conversation("b", "pong", &["a"]).unwrap();
    let client = rt.spawn_conversation("a", "ping", &["b"]).unwrap();
    rt.run_until_quiet(100);
    assert_eq!(log(&rt, "a", &client), vec![triple("open", "start", "waiting"), triple("answered", "waiting", "done")]);
    assert_eq!(log(&rt, "b", &server), vec![triple("serve", "idle", "served")]);
    let inst = rt.agent("a").unwrap().conversation(&client).unwrap();
    assert_eq!(inst.current, "done");
    assert_eq!(inst.binding("Serial"), Some(&Term::int(7)));
    assert_eq!(inst.history[0].sent.len(), 1);
    assert_eq!(inst.history[0].sent[0].content.to_term(), parse_term("ping(7)").unwrap());
    assert!(rt.agent("a").unwrap().cx.holds(&Term::atom("answered")).unwrap());
    assert_eq!(rt.trace.count("ConversationAdvanced"), 3);
}

#[test]
fn unmatched_events_change_nothing() {
    let mut rt = runtime();
    let client = rt.spawn_conversation("a", "ping", &["b"]).unwrap();
    rt.run_until_quiet(5);
    let before = rt.agent("a").unwrap().conversation(&client).unwrap();
    assert_eq!(before.current, "waiting");
    rt.signal("a", Some(&client), Term::atom("noise")).unwrap();
    rt.run_until_quiet(20);
    let after = rt.agent("a").unwrap().conversation(&client).unwrap();
    assert_eq!(after.current, before.current);
    assert_eq!(after.history, before.history);
    assert_eq!(after.bindings, before.bindings);
    assert_eq!(after.ignored.len(), before.ignored.len() + 1);
}

#[test]
fn final_states_ignore_everything() {
    let mut rt = runtime();
    rt.spawn_conversation("b", "pong", &["a"]).unwrap();
    let client = rt.spawn_conversation("a", "ping", &["b"]).unwrap();
    rt.run_until_quiet(100);
    rt.signal("a", None, Term::atom("start")).unwrap();
    rt.run_until_quiet(20);
    let inst = rt.agent("a").unwrap().conversation(&client).unwrap();
    assert_eq!(inst.current, "done");
    assert_eq!(inst.history.len(), 2);
}

#[test]
fn replay_reproduces_state() {
    let mut rt = runtime();
    rt.spawn_conversation("b", "pong", &["a"]).unwrap();
    let client = rt.spawn_conversation("a", "ping", &["b"]).unwrap();
    rt.run_until_quiet(100);
    let inst = rt.agent("a").unwrap().conversation(&client).unwrap();
    assert_eq!(replay(&ping(), &inst.history).unwrap(), inst.current);
    for cut in 0..inst.history.len() {
        let expected = if cut == 0 { "start".to_string() } else { inst.history[cut - 1].to.clone() };
        assert_eq!(replay(&ping(), &inst.history[..cut]).unwrap(), expected);
    }
    let mut broken = inst.history.clone();
    broken.swap(0, 1);
    assert!(replay(&ping(), &broken).is_err());
}

#[test]
fn bounce_takes_the_refusal_branch() {
    let mut rt = runtime();
    let client = rt.spawn_conversation("a", "ping", &["ghost"]).unwrap();
    rt.run_until_quiet(50);
    let inst = rt.agent("a").unwrap().conversation(&client).unwrap();
    assert_eq!(rt.router.bounced(), 1);
    assert_eq!(inst.current, "refused");
    assert_eq!(inst.history.last().unwrap().rule, "refused");
}

fn faulty() -> ConversationClass {
    ConversationClass::new(
        "faulty",
        &["s", "t"],
        "s",
        &["t"],
        vec![ConvRule::new("go", "s", "t")
            .before(|h| h.assert("beliefs", Term::atom("half_done")))
            .send(MessageTemplate::new(Performative::Tell, Recipients::Peers, "x"))
            .after(|_| Err(CoreError::failed("boom")))],
    )
    .unwrap()
}

#[test]
fn hook_faults_roll_back() {
    let mut rt = Runtime::new(3);
    rt.register_class(faulty()).unwrap();
    let comm = Capabilities { communication: true, ..Capabilities::none() };
    rt.create_agent(AgentSpec::new("a", comm).conversation("faulty"), BaseObject::new("a", "agent")).unwrap();
    rt.create_agent(AgentSpec::new("b", comm), BaseObject::new("b", "agent")).unwrap();
    let id = rt.spawn_conversation("a", "faulty", &["b"]).unwrap();
    rt.run_until_quiet(50);
    let a = rt.agent("a").unwrap();
    let inst = a.conversation(&id).unwrap();
    assert_eq!(inst.current, "s");
    assert!(inst.history.is_empty());
    assert!(!a.cx.holds(&Term::atom("half_done")).unwrap());
    assert_eq!(rt.router.routed(), 0);
    assert_eq!(rt.trace.count("ConvFault"), 1);
}

#[test]
fn classes_are_validated() {
    let bad = ConversationClass::new("bad", &["a"], "b", &[], vec![]);
    assert!(matches!(bad, Err(CoreError::InvalidConversation(_))));
    let bad = ConversationClass::new("bad", &["a"], "a", &[], vec![ConvRule::new("r", "a", "zz")]);
    assert!(matches!(bad, Err(CoreError::InvalidConversation(_))));
    let mut rt = runtime();
    assert!(rt.spawn_conversation("a", "pong", &["b"]).is_err());
    assert!(rt.spawn_conversation("a", "nothing", &["b"]).is_err());
}
