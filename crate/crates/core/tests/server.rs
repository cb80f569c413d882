use std::sync::Arc;

use incgraph::ccontrol::{Coordinator, CoordinatorConfig};
use incgraph::server::{spawn, Client, ServerHandle};
use incgraph::{AlgorithmDef, GraphStore, System, SystemConfig, UNREACHED};
use serde_json::json;

fn start(n: usize) -> ServerHandle {
    let cfg = SystemConfig::new(vec![AlgorithmDef::bfs(0), AlgorithmDef::sssp(0)]);
    let sys = System::new(GraphStore::with_vertices(n), &cfg).unwrap();
    let coord = Arc::new(Coordinator::start(sys, CoordinatorConfig::default()));
    spawn(coord, "127.0.0.1:0").unwrap()
}

#[test]
fn write_and_read_transcript() {
    let server = start(3);
    let mut c = Client::connect(server.local_addr()).unwrap();

    let r = c.request("get_current_version", vec![]).unwrap();
    assert_eq!(r, json!({"id": 1, "ok": true, "version": 0}));
    let r = c.request("get_value", vec![json!(0), json!(2)]).unwrap();
    assert_eq!(r["value"], json!(UNREACHED));

    let r = c
        .request("ins_edge", vec![json!(0), json!(1), json!(4)])
        .unwrap();
    assert_eq!(
        (r["ok"].clone(), r["version"].clone()),
        (json!(true), json!(1))
    );
    // weight defaults to 0
    let v2 = c
        .write("ins_edge", vec![json!(1), json!(2)])
        .unwrap()
        .unwrap();
    assert_eq!(v2, 2);

    assert_eq!(
        c.request("get_value", vec![json!(2), json!(2)]).unwrap()["value"],
        json!(2)
    );
    assert_eq!(
        c.request("get_value", vec![json!(2), json!(2), json!(1)])
            .unwrap()["value"],
        json!(4)
    );
    assert_eq!(
        c.request("get_parent", vec![json!(2), json!(2), json!(1)])
            .unwrap()["parent"],
        json!([1, 0])
    );
    assert_eq!(
        c.request("get_parent", vec![json!(2), json!(0)]).unwrap()["parent"],
        json!(null)
    );
    assert_eq!(
        c.request("get_value", vec![json!(1), json!(2)]).unwrap()["value"],
        json!(UNREACHED)
    );
    let r = c.request("get_modified_vertices", vec![json!(2)]).unwrap();
    assert_eq!(r["vertices"], json!([2]));

    let r = c.request("ins_vertex", vec![]).unwrap();
    assert_eq!(r["vertices"], json!([3]));
    let r = c
        .request(
            "txn_updates",
            vec![json!(["ins_edge", 2, 3, 1]), json!(["del_edge", 0, 1, 4])],
        )
        .unwrap();
    assert_eq!(r["ok"], json!(true));
    let ver = r["version"].as_u64().unwrap();
    assert_eq!(
        c.request("get_value", vec![json!(ver), json!(3)]).unwrap()["value"],
        json!(UNREACHED)
    );

    // engine errors leave the connection open
    let r = c
        .request("del_edge", vec![json!(0), json!(1), json!(4)])
        .unwrap();
    assert_eq!(r["ok"], json!(false));
    assert!(r["error"].is_string());
    let r = c.request("get_value", vec![json!(999), json!(0)]).unwrap();
    assert_eq!(r["ok"], json!(false));

    assert_eq!(
        c.request("release_history", vec![json!(1)]).unwrap()["ok"],
        json!(true)
    );
    assert_eq!(
        c.request("get_current_version", vec![]).unwrap()["version"],
        json!(ver)
    );
    server.stop();
}

#[test]
fn malformed_requests_get_an_error_and_close() {
    let server = start(2);
    for line in [
        "not json",
        r#"{"id":1,"op":"fly","args":[]}"#,
        r#"{"id":2,"op":"ins_edge","args":[0]}"#,
        r#"{"id":3,"op":"ins_edge","args":[-1, 0]}"#,
        r#"{"id":4,"op":"txn_updates","args":[["txn_updates"]]}"#,
        r#"{"id":5,"op":"get_value","args":"x"}"#,
    ] {
        let mut c = Client::connect(server.local_addr()).unwrap();
        c.send_raw(line).unwrap();
        let r = c.read_response().unwrap();
        assert_eq!(r["ok"], json!(false), "{line}");
        assert!(
            c.read_response().is_err(),
            "connection stayed open after {line}"
        );
    }
    // the server still serves new connections
    let mut c = Client::connect(server.local_addr()).unwrap();
    assert_eq!(
        c.request("get_current_version", vec![]).unwrap()["ok"],
        json!(true)
    );
    server.stop();
}

#[test]
fn pipelined_responses_keep_request_order() {
    let server = start(64);
    let mut c = Client::connect(server.local_addr()).unwrap();
    for i in 0..63u64 {
        c.send_raw(&json!({"id": i, "op": "ins_edge", "args": [i, i + 1, 1]}).to_string())
            .unwrap();
        c.send_raw(&json!({"id": 1000 + i, "op": "get_current_version"}).to_string())
            .unwrap();
    }
    for i in 0..63u64 {
        assert_eq!(c.read_response().unwrap()["id"], json!(i));
        assert_eq!(c.read_response().unwrap()["id"], json!(1000 + i));
    }
    let r = c.request("get_current_version", vec![]).unwrap();
    let v = r["version"].clone();
    assert_eq!(
        c.request("get_value", vec![v, json!(63)]).unwrap()["value"],
        json!(63)
    );
    server.stop();
}
