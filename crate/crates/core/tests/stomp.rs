use std::collections::HashSet;
use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use affectplay::stomp::{decode_frame, encode_frame, Broker, BrokerConfig, BrokerError, Client, Command, Destination, Frame};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

const WAIT: Duration = Duration::from_secs(5);

fn broker() -> Broker {
    Broker::start(&BrokerConfig { port: 0, ..Default::default() }).unwrap()
}

fn client(b: &Broker) -> Client {
    Client::connect(b.local_addr()).unwrap()
}

fn header_text(verbatim: bool) -> BoxedStrategy<String> {
    if verbatim {
        "[a-zA-Z0-9 ._/=-]{0,12}".boxed()
    } else {
        prop_oneof![Just(String::new()), "[a-z:\\\\\n\r ]{1,8}", "\\PC{0,12}"].boxed()
    }
}

fn arb_frame() -> impl Strategy<Value = Frame> {
    prop::sample::select(Command::ALL.to_vec()).prop_flat_map(|command| {
        let verbatim = matches!(command, Command::Connect | Command::Connected);
        let key = header_text(verbatim).prop_filter("key", move |k| {
            !k.is_empty() && k != "content-length" && !(verbatim && k.contains(':'))
        });
        let headers = prop::collection::vec((key, header_text(verbatim)), 0..5);
        let empty_body = matches!(command, Command::Connect | Command::Subscribe | Command::Unsubscribe | Command::Disconnect);
        let body = if empty_body { Just(Vec::new()).boxed() } else { prop::collection::vec(any::<u8>(), 0..64).boxed() };
        (headers, body).prop_map(move |(headers, body)| Frame { command, headers, body })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn frames_round_trip(f in arb_frame()) {
        let bytes = encode_frame(&f).unwrap();
        let (back, used) = decode_frame(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(back, f);
    }
}

#[test]
fn concatenated_stream_decodes_in_order() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let frames: Vec<Frame> = (0..1000).map(|_| arb_frame().new_tree(&mut runner).unwrap().current()).collect();
    let stream: Vec<u8> = frames.iter().flat_map(|f| encode_frame(f).unwrap()).collect();
    let mut pos = 0;
    for f in &frames {
        let (back, used) = decode_frame(&stream[pos..]).unwrap();
        assert_eq!(&back, f);
        pos += used;
    }
    assert_eq!(pos, stream.len());
}

/// Reads a frame by hand: command line, header lines, blank line, then
/// exactly `content-length` body bytes followed by NUL.
fn oracle_body(bytes: &[u8]) -> Vec<u8> {
    let mut lines = 0;
    let mut i = 0;
    let mut length = None;
    loop {
        let end = i + bytes[i..].iter().position(|&b| b == b'\n').unwrap();
        let line = std::str::from_utf8(&bytes[i..end]).unwrap();
        i = end + 1;
        if line.is_empty() && lines > 0 {
            break;
        }
        if let Some(n) = line.strip_prefix("content-length:") {
            length = Some(n.parse::<usize>().unwrap());
        }
        lines += 1;
    }
    let n = length.unwrap();
    assert_eq!(bytes[i + n], 0);
    assert_eq!(i + n + 1, bytes.len());
    bytes[i..i + n].to_vec()
}

#[test]
fn bodies_may_contain_nul() {
    let body = b"a\0b\0\0c".to_vec();
    let f = Frame::new(Command::Send).header("destination", "/queue/x").body(body.clone());
    let bytes = encode_frame(&f).unwrap();
    assert_eq!(oracle_body(&bytes), body);
    assert_eq!(decode_frame(&bytes).unwrap().0.body, body);

    // and across the broker
    let b = broker();
    let mut rx = client(&b);
    rx.subscribe(&Destination::queue("x"), "s").unwrap();
    let mut tx = client(&b);
    tx.send(&Destination::queue("x"), &body, &[]).unwrap();
    assert_eq!(rx.recv(WAIT).unwrap().unwrap().body, body);
}

#[test]
fn topic_fans_out_to_every_subscriber() {
    let b = broker();
    for n in [1usize, 3, 7] {
        let topic = Destination::topic(format!("t{n}"));
        let mut subs: Vec<Client> = (0..n).map(|_| client(&b)).collect();
        for (i, s) in subs.iter_mut().enumerate() {
            s.subscribe(&topic, &format!("s{i}")).unwrap();
        }
        let mut tx = client(&b);
        tx.send_confirmed(&topic, b"hello", &[("k", "v")]).unwrap();
        for s in &mut subs {
            let m = s.recv(WAIT).unwrap().unwrap();
            assert_eq!((m.command, m.body.as_slice(), m.get("k")), (Command::Message, &b"hello"[..], Some("v")));
            assert!(s.recv(Duration::from_millis(50)).unwrap().is_none());
        }
    }
}

fn drain(c: &mut Client, quiet: Duration) -> Vec<String> {
    let mut out = Vec::new();
    while let Some(m) = c.recv(quiet).unwrap() {
        out.push(m.body_text());
    }
    out
}

#[test]
fn queue_round_robins_between_two_consumers() {
    let b = broker();
    let q = Destination::queue("work");
    let (mut a, mut c) = (client(&b), client(&b));
    a.subscribe(&q, "a").unwrap();
    c.subscribe(&q, "c").unwrap();
    let mut tx = client(&b);
    for i in 0..4 {
        tx.send_confirmed(&q, i.to_string().as_bytes(), &[]).unwrap();
    }
    let (got_a, got_c) = (drain(&mut a, Duration::from_millis(200)), drain(&mut c, Duration::from_millis(200)));
    assert_eq!((got_a.len(), got_c.len()), (2, 2));
}

#[test]
fn queue_buffers_until_a_consumer_arrives() {
    let b = broker();
    let q = Destination::queue("later");
    let mut tx = client(&b);
    for i in 0..5 {
        tx.send_confirmed(&q, format!("m{i}").as_bytes(), &[]).unwrap();
    }
    assert_eq!(b.buffered("later"), 5);
    let mut rx = client(&b);
    rx.subscribe(&q, "s").unwrap();
    assert_eq!(drain(&mut rx, Duration::from_millis(200)), ["m0", "m1", "m2", "m3", "m4"]);
    assert_eq!(b.buffered("later"), 0);
}

#[test]
fn queue_partition_is_exactly_once() {
    let started = Instant::now();
    let b = broker();
    let q = Destination::queue("partition");
    let mut consumers: Vec<Client> = (0..3).map(|_| client(&b)).collect();
    for (i, c) in consumers.iter_mut().enumerate() {
        c.subscribe(&q, &format!("c{i}")).unwrap();
    }
    let mut tx = client(&b);
    for i in 0..1000 {
        tx.send(&q, format!("{i}").as_bytes(), &[("tag", &i.to_string())]).unwrap();
    }
    tx.send_confirmed(&Destination::topic("flush"), b"", &[]).unwrap();
    let mut seen = Vec::new();
    let mut per_consumer = Vec::new();
    for c in &mut consumers {
        let got = drain(c, Duration::from_millis(300));
        per_consumer.push(got.len());
        seen.extend(got);
    }
    assert_eq!(seen.len(), 1000, "per consumer {per_consumer:?}");
    let unique: HashSet<_> = seen.iter().collect();
    assert_eq!(unique.len(), 1000);
    assert!(per_consumer.iter().all(|&n| n > 0));
    assert!(started.elapsed() < Duration::from_secs(10));
}

fn raw_exchange(b: &Broker, bytes: &[u8]) -> String {
    let mut s = TcpStream::connect(b.local_addr()).unwrap();
    s.set_read_timeout(Some(WAIT)).unwrap();
    s.write_all(bytes).unwrap();
    let mut out = Vec::new();
    let _ = s.read_to_end(&mut out);
    String::from_utf8_lossy(&out).into_owned()
}

#[test]
fn receipts_follow_the_request() {
    let b = broker();
    let reply = raw_exchange(
        &b,
        b"CONNECT\naccept-version:1.2\nhost:x\n\n\0SUBSCRIBE\nid:1\ndestination:/topic/a\nreceipt:r-7\n\n\0DISCONNECT\nreceipt:bye\n\n\0",
    );
    let r7 = reply.find("receipt-id:r-7").expect("subscribe receipt");
    let bye = reply.find("receipt-id:bye").expect("disconnect receipt");
    assert!(reply.starts_with("CONNECTED\n") && r7 < bye, "{reply}");
}

#[test]
fn garbage_gets_an_error_and_spares_other_connections() {
    let b = broker();
    let mut bystander = client(&b);
    bystander.subscribe(&Destination::topic("calm"), "s").unwrap();
    for garbage in [&b"HELLO WORLD\n\n\0"[..], b"\x00\x01\x02garbage-bytes-that-go-on-and-on", b"CONNECT\nno colon here\n\n\0"] {
        let reply = raw_exchange(&b, garbage);
        assert!(reply.starts_with("ERROR\n"), "{reply:?}");
    }
    let reply = raw_exchange(&b, b"CONNECT\naccept-version:1.2\nhost:x\n\n\0SEND\ndestination:/nowhere\n\n\0");
    assert!(reply.contains("ERROR\n"));
    let mut tx = client(&b);
    tx.send_confirmed(&Destination::topic("calm"), b"still here", &[]).unwrap();
    assert_eq!(bystander.recv(WAIT).unwrap().unwrap().body_text(), "still here");
}

#[test]
fn second_broker_on_the_same_port_fails() {
    let b = broker();
    let err = Broker::start(&BrokerConfig { port: b.local_addr().port(), ..Default::default() }).err().unwrap();
    assert!(matches!(err, BrokerError::PortInUse(p) if p == b.local_addr().port()));
}

#[test]
fn stop_closes_every_connection() {
    let b = broker();
    let mut clients: Vec<Client> = (0..5).map(|_| client(&b)).collect();
    for (i, c) in clients.iter_mut().enumerate() {
        c.subscribe(&Destination::topic("x"), &format!("{i}")).unwrap();
    }
    assert_eq!(b.connection_count(), 5);
    assert_eq!(b.stop(), 5);
    for c in &mut clients {
        assert!(matches!(c.recv(WAIT), Err(affectplay::stomp::ClientError::Closed)));
    }
}
