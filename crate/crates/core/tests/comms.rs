use std::collections::BTreeMap;
use std::time::Duration;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stormkit_core::comms::{
    decode, encode, AclMessage, Content, Link, LocalLink, Performative, Router, RouterServer, TcpLink, TERM_LANGUAGE,
};
use stormkit_core::kernel::{AgentSpec, BaseObject, Capabilities, Runtime};
use stormkit_core::CoreError;
use stormkit_logic::{parse_term, LogicModule, Term};

fn recv_all(link: &mut LocalLink) -> Vec<AclMessage> {
    let mut out = Vec::new();
    while let Some(env) = link.try_recv().unwrap() {
        out.push(decode(&env).unwrap().0);
    }
    out
}

fn seq_of(m: &AclMessage) -> i64 {
    m.content.as_term().and_then(|t| t.args().first()).and_then(Term::as_int).unwrap()
}

#[test]
fn thousand_messages_keep_per_pair_order() {
    let router = Router::new();
    let names = ["a", "b", "c"];
    let mut links: Vec<LocalLink> = names.iter().map(|n| LocalLink::connect(&router, n).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut sent: BTreeMap<(usize, usize), Vec<i64>> = BTreeMap::new();
    for i in 0..1000 {
        let from = rng.gen_range(0..3);
        let to = rng.gen_range(0..3);
        let m = AclMessage::new(Performative::Tell, names[from], names[to], Term::compound("seq", vec![Term::int(i)]));
        links[from].send(encode(&m).unwrap()).unwrap();
        sent.entry((from, to)).or_default().push(i);
        // drain now and then so delivery interleaves with sending
        if rng.gen_bool(0.01) {
            let k = rng.gen_range(0..3);
            for m in recv_all(&mut links[k]) {
                let from = names.iter().position(|n| *n == m.sender).unwrap();
                sent.entry((from, k)).or_default();
                let expected = sent.get_mut(&(from, k)).unwrap();
                assert_eq!(expected.remove(0), seq_of(&m));
            }
        }
    }
    for (k, link) in links.iter_mut().enumerate() {
        for m in recv_all(link) {
            let from = names.iter().position(|n| *n == m.sender).unwrap();
            let expected = sent.get_mut(&(from, k)).unwrap();
            assert_eq!(expected.remove(0), seq_of(&m), "{} -> {}", m.sender, m.receiver);
        }
    }
    assert!(sent.values().all(Vec::is_empty), "undelivered: {sent:?}");
    assert_eq!(router.routed(), 1000);
}

#[test]
fn offline_agent_gets_its_queue_in_order() {
    let mut rt = Runtime::new(5);
    let comm = Capabilities { communication: true, ..Capabilities::none() };
    rt.create_agent(AgentSpec::new("a", comm), BaseObject::new("a", "agent")).unwrap();
    rt.create_agent(AgentSpec::new("b", comm), BaseObject::new("b", "agent")).unwrap();
    rt.go_offline("b").unwrap();
    let a = rt.agent("a").unwrap();
    for i in 0..25 {
        a.cx.send(AclMessage::new(Performative::Tell, "a", "b", Term::compound("seq", vec![Term::int(i)]))).unwrap();
    }
    rt.run_until_quiet(100);
    assert_eq!(rt.router.queued("b"), 25);
    assert_eq!(rt.trace.lines().iter().filter(|l| l.agent == "b" && l.kind == "MessageReceived").count(), 0);
    rt.go_online("b").unwrap();
    assert_eq!(rt.router.queued("b"), 0);
    rt.run_until_quiet(200);
    let got: Vec<i64> = rt
        .trace
        .lines()
        .iter()
        .filter(|l| l.agent == "b" && l.kind == "MessageReceived")
        .map(|l| seq_of(&AclMessage::new(Performative::Tell, "x", "y", parse_term(&l.payload).unwrap().args()[3].clone())))
        .collect();
    assert_eq!(got, (0..25).collect::<Vec<_>>());
}

#[test]
fn outbox_is_held_while_offline() {
    let mut rt = Runtime::new(5);
    let comm = Capabilities { communication: true, ..Capabilities::none() };
    rt.create_agent(AgentSpec::new("a", comm), BaseObject::new("a", "agent")).unwrap();
    rt.create_agent(AgentSpec::new("b", comm), BaseObject::new("b", "agent")).unwrap();
    rt.go_offline("a").unwrap();
    rt.agent("a").unwrap().cx.send(AclMessage::new(Performative::Tell, "a", "b", Term::atom("late"))).unwrap();
    rt.run_until_quiet(20);
    assert_eq!(rt.router.routed(), 0);
    rt.go_online("a").unwrap();
    rt.run_until_quiet(20);
    assert_eq!(rt.router.routed(), 1);
}

#[test]
fn ask_one_is_answered_from_beliefs() {
    let mut rt = Runtime::new(9);
    let comm = Capabilities { communication: true, ..Capabilities::none() };
    let beliefs = LogicModule::from_text("beliefs", "color(sky, blue). color(grass, green).").unwrap();
    rt.create_agent(AgentSpec::new("oracle", comm).module(beliefs), BaseObject::new("oracle", "agent")).unwrap();
    rt.create_agent(AgentSpec::new("asker", comm), BaseObject::new("asker", "agent")).unwrap();
    let asker = rt.agent("asker").unwrap();
    asker
        .cx
        .send(AclMessage::new(Performative::AskOne, "asker", "oracle", parse_term("color(grass, C)").unwrap()).reply_with("q1"))
        .unwrap();
    asker.cx.send(AclMessage::new(Performative::AskOne, "asker", "oracle", parse_term("color(sea, C)").unwrap())).unwrap();
    asker.cx.send(AclMessage::new(Performative::Tell, "asker", "nobody", Term::atom("hello"))).unwrap();
    rt.run_until_quiet(100);
    let received: Vec<Term> = rt
        .trace
        .lines()
        .iter()
        .filter(|l| l.agent == "asker" && l.kind == "MessageReceived")
        .map(|l| parse_term(&l.payload).unwrap())
        .collect();
    let rendered: Vec<String> = received.iter().map(Term::to_string).collect();
    assert!(rendered.contains(&"msg(tell,oracle,asker,color(grass,green))".to_string()), "{rendered:?}");
    assert!(rendered.iter().any(|r| r.starts_with("msg(sorry,oracle,asker,color(sea,")), "{rendered:?}");
    assert!(rendered.contains(&"msg(sorry,router,asker,unknown_receiver(nobody))".to_string()), "{rendered:?}");
    assert_eq!(rt.router.bounced(), 1);
}

#[test]
fn names_are_unique_at_the_router() {
    let router = Router::new();
    let _a = LocalLink::connect(&router, "a").unwrap();
    assert!(matches!(LocalLink::connect(&router, "a"), Err(CoreError::NameTaken(_))));
}

#[test]
fn tcp_links_route_through_the_server() {
    let router = Router::new();
    let mut server = RouterServer::bind("127.0.0.1:0", router.clone()).unwrap();
    let addr = server.local_addr();
    let t = Duration::from_secs(5);
    let mut a = TcpLink::connect(addr, "a", t).unwrap();
    let mut b = TcpLink::connect(addr, "b", t).unwrap();
    assert!(matches!(TcpLink::connect(addr, "a", t), Err(CoreError::NameTaken(_))));
    for i in 0..50 {
        let m = AclMessage::new(Performative::Tell, "a", "b", Term::compound("seq", vec![Term::int(i)]));
        a.send(encode(&m).unwrap()).unwrap();
    }
    for i in 0..50 {
        let env = b.recv_timeout(t).expect("delivered");
        assert_eq!(seq_of(&decode(&env).unwrap().0), i);
    }
    a.send(encode(&AclMessage::new(Performative::Tell, "a", "ghost", Term::atom("x"))).unwrap()).unwrap();
    let bounce = decode(&a.recv_timeout(t).expect("bounced")).unwrap().0;
    assert_eq!(bounce.performative, Performative::Sorry);
    assert_eq!(bounce.sender, "router");
    b.close();
    a.close();
    server.shutdown();
}

fn token() -> impl Strategy<Value = String> {
    "[a-z][a-zA-Z0-9_\\-.]{0,8}"
}

fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        "[a-z][a-z0-9_]{0,5}".prop_map(|s| Term::atom(s.as_str())),
        "[ -~]{0,6}".prop_map(|s| Term::atom(s.as_str())),
        any::<i32>().prop_map(|i| Term::int(i64::from(i))),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            ("[a-z][a-z0-9]{0,4}", prop::collection::vec(inner.clone(), 1..4)).prop_map(|(f, a)| Term::compound(f.as_str(), a)),
            prop::collection::vec(inner, 0..4).prop_map(Term::list),
        ]
    })
}

fn content() -> impl Strategy<Value = (String, Content)> {
    prop_oneof![
        term().prop_map(|t| (TERM_LANGUAGE.to_string(), Content::Term(t))),
        "\\PC{0,40}".prop_map(|s| ("text".to_string(), Content::Text(s))),
    ]
}

fn message() -> impl Strategy<Value = AclMessage> {
    let perf = prop_oneof![
        Just(Performative::Tell),
        Just(Performative::Reply),
        Just(Performative::AskOne),
        Just(Performative::AskAll),
        Just(Performative::Tell),
        Just(Performative::Sorry),
        Just(Performative::Achieve),
        token().prop_map(|t| Performative::parse(&t)),
    ];
    let addressing = (token(), token(), prop::option::of(token()), prop::option::of(token()), token());
    (perf, addressing, content()).prop_map(|(performative, (sender, receiver, reply_with, in_reply_to, ontology), (language, content))| {
        let mut m = AclMessage::new(performative, &sender, &receiver, Term::void());
        m.reply_with = reply_with;
        m.in_reply_to = in_reply_to.or_else(|| (m.performative == Performative::Reply).then(|| "r".to_string()));
        m.ontology = ontology;
        m.language = language;
        m.content = content;
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]
    #[test]
    fn codec_round_trips(m in message()) {
        let bytes = encode(&m).unwrap();
        let (back, used) = decode(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }
}
