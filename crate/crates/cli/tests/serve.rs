use std::path::Path;

use futures::{SinkExt, StreamExt};
use laps_cli::serve;
use laps_core::{run_scenario, EventKind, ScenarioScript, SessionConfig, SessionMessage, SessionUpdate};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;

async fn start() -> std::net::SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(serve::serve(listener, SessionConfig::default()));
    addr
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<TcpStream>>;

async fn connect(addr: std::net::SocketAddr) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/session"))
        .await
        .unwrap();
    ws
}

/// Sends the messages in order, then a malformed sentinel; the sentinel's
/// error reply marks the end of the updates they caused.
async fn roundtrip(ws: &mut Ws, msgs: &[SessionMessage]) -> Vec<SessionUpdate> {
    for m in msgs {
        ws.send(Message::text(serde_json::to_string(m).unwrap())).await.unwrap();
    }
    ws.send(Message::text("end")).await.unwrap();
    let mut out = Vec::new();
    while let Some(Ok(m)) = ws.next().await {
        let u: SessionUpdate = serde_json::from_str(m.to_text().unwrap()).unwrap();
        if matches!(u, SessionUpdate::Error { .. }) {
            return out;
        }
        out.push(u);
    }
    panic!("connection closed early");
}

#[tokio::test]
async fn healthz_answers_200() {
    let addr = start().await;
    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(b"GET /healthz HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut buf = String::new();
    s.read_to_string(&mut buf).await.unwrap();
    assert!(buf.starts_with("HTTP/1.1 200"), "{buf}");
}

#[tokio::test]
async fn reset_gets_an_info_update() {
    let addr = start().await;
    let mut ws = connect(addr).await;
    let up = roundtrip(&mut ws, &[SessionMessage::Reset]).await;
    assert!(matches!(up[..], [SessionUpdate::Info { .. }]));
}

#[tokio::test]
async fn sessions_do_not_share_state() {
    let addr = start().await;
    let mut a = connect(addr).await;
    let mut b = connect(addr).await;
    let laser = |seq| SessionMessage::Laser { on: false, x: 0.0, y: 0.0, seq };
    roundtrip(&mut a, &[laser(10)]).await;
    // b has seen nothing, so seq 1 is still fresh there
    let up = roundtrip(&mut b, &[laser(1)]).await;
    assert!(matches!(up[0], SessionUpdate::FrameResult { seq: 1, .. }));
}

/// Plays a scenario through the websocket and returns the command events.
async fn play(ws: &mut Ws, script: &ScenarioScript) -> Vec<(String, u64, Option<(f64, f64)>)> {
    let (w, h) = (script.scene.screen.w(), script.scene.screen.h());
    let mut msgs = vec![SessionMessage::StartCalibration];
    let mut seq = 1;
    for (x, y) in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)] {
        for _ in 0..10 {
            msgs.push(SessionMessage::Laser { on: true, x, y, seq });
            seq += 1;
        }
    }
    for (_, on, p) in script.frames() {
        msgs.push(SessionMessage::Laser {
            on,
            x: p.x / w,
            y: p.y / h,
            seq,
        });
        seq += 1;
    }
    let mut events = Vec::new();
    for u in roundtrip(ws, &msgs).await {
        if let SessionUpdate::Event { kind, frame, x, y } = u {
            events.push((kind, frame, x.zip(y)));
        }
    }
    events
}

#[tokio::test]
async fn transport_matches_run() {
    let addr = start().await;
    for name in ["next_slide", "drag_drop", "right_click"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("scenarios/{name}.json"));
        let script = ScenarioScript::load(&path).unwrap();
        let want: Vec<_> = run_scenario(&script)
            .unwrap()
            .events()
            .into_iter()
            .filter(|e| !matches!(e.kind, EventKind::InfoText(_)))
            .map(|e| (e.kind.name().to_string(), e.frame, e.kind.position().map(|p| (p.x, p.y))))
            .collect();
        let mut ws = connect(addr).await;
        let got = play(&mut ws, &script).await;
        assert_eq!(got.len(), want.len(), "{name}: {got:?} vs {want:?}");
        for (g, w) in got.iter().zip(&want) {
            assert_eq!((&g.0, g.1), (&w.0, w.1), "{name}");
            match (g.2, w.2) {
                (Some(a), Some(b)) => assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6),
                (a, b) => assert_eq!(a, b),
            }
        }
    }
}
