//! Topic fan-out versus queue round-robin on an in-process broker.

use std::time::Duration;

use affectplay::stomp::{Broker, BrokerConfig, Client, Destination};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let broker = Broker::start(&BrokerConfig { port: 0, ..Default::default() })?;
    let mut clients: Vec<Client> = (0..3).map(|_| Client::connect(broker.local_addr())).collect::<Result<_, _>>()?;
    for (i, c) in clients.iter_mut().enumerate() {
        c.subscribe(&Destination::topic("news"), &format!("t{i}"))?;
        c.subscribe(&Destination::queue("jobs"), &format!("q{i}"))?;
    }
    let mut producer = Client::connect(broker.local_addr())?;
    producer.send_confirmed(&Destination::topic("news"), b"everyone sees this", &[])?;
    for n in 0..6 {
        producer.send_confirmed(&Destination::queue("jobs"), format!("job {n}").as_bytes(), &[])?;
    }
    for (i, c) in clients.iter_mut().enumerate() {
        while let Some(m) = c.recv(Duration::from_millis(200))? {
            println!("client {i} <- {} {:?}", m.get("destination").unwrap_or("?"), m.body_text());
        }
    }
    println!("closed {} connections", broker.stop());
    Ok(())
}
