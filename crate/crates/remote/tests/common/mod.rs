use std::collections::BTreeMap;
use std::sync::Arc;

use text2seg_core::{Backend, MockBackend, MockScene, MockShape};

/// Serves `backend` on an ephemeral port from a background runtime.
pub fn spawn(backend: Arc<dyn Backend>) -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    let ids = BTreeMap::from([("segmenter".to_string(), "mock".to_string())]);
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            text2seg_remote::serve(listener, text2seg_remote::router(backend, ids))
                .await
                .unwrap();
        });
    });
    format!("http://{addr}")
}

pub fn street() -> MockScene {
    MockScene {
        w: 32,
        h: 24,
        shapes: vec![
            MockShape::rect(2, 2, 14, 12, "building").with_scores([("building", 0.9), ("house", 0.8)]),
            MockShape::circle(24.0, 8.0, 4.0, "tree"),
            MockShape::rect(18, 16, 28, 21, "car"),
        ],
    }
}

pub fn mock() -> Arc<MockBackend> {
    Arc::new(MockBackend::new(street()).unwrap())
}
