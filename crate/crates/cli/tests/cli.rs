//! End-to-end tests of the `memento` binary.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::thread::sleep;
use std::time::{Duration, Instant};

use chrono::NaiveDateTime;

const TRAVEL_AT: &str = "Mon, 12 Oct 2009 16:25:00 GMT";

fn memento(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memento"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn unix(text: &str) -> i64 {
    NaiveDateTime::parse_from_str(text, "%a, %d %b %Y %H:%M:%S GMT")
        .unwrap()
        .and_utc()
        .timestamp()
}

#[test]
fn travel_in_the_scripted_harness_prints_the_closest_memento() {
    // The flow1 fixture's three revisions.
    let revisions = [
        ("Tue, 10 Feb 2009 09:00:00 GMT", "hello, version 1"),
        ("Fri, 09 Oct 2009 14:00:00 GMT", "hello, version 2"),
        ("Wed, 14 Oct 2009 08:30:00 GMT", "hello, version 3"),
    ];
    let want = revisions
        .iter()
        .min_by_key(|(d, _)| (unix(d) - unix(TRAVEL_AT)).abs())
        .unwrap();
    let o = memento(&["travel", "http://lanlsource.lanl.gov/hello", "--datetime", TRAVEL_AT, "--scenario", "flow1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains(want.1), "{out}");
    assert!(out.contains(&format!("Memento-Datetime: {}", want.0)), "{out}");
}

#[test]
fn unknown_uri_exits_1() {
    let o = memento(&["travel", "http://nowhere.example/", "--datetime", TRAVEL_AT, "--scenario", "flow5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no memento found"));
}

#[test]
fn missing_datetime_exits_2_with_usage() {
    let o = memento(&["travel", "http://lanlsource.lanl.gov/hello", "--scenario", "flow1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unparseable_datetime_exits_2() {
    let o = memento(&["travel", "http://lanlsource.lanl.gov/hello", "--datetime", "yesterday", "--scenario", "flow1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trace_lists_every_hop() {
    let o = memento(&[
        "travel",
        "http://odusource.cs.odu.edu/demo.html",
        "--datetime",
        TRAVEL_AT,
        "--scenario",
        "flow2",
        "--trace",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).collect();
    assert_eq!(rows.len(), 3, "{out}");
    assert!(rows[0].contains("302") && rows[0].contains("http://ta.odu.example/timegate/"));
    assert!(rows[1].contains("choice"));
    assert!(!out.contains("<html>"));
}

#[test]
fn raw_prints_only_the_unrewritten_body() {
    let args = ["travel", "http://www.noaa.gov/", "--datetime", "Fri, 09 Sep 2005 12:00:00 GMT", "--scenario", "katrina"];
    let raw = memento(&[&args[..], &["--raw"]].concat());
    assert_eq!(raw.status.code(), Some(0));
    let body = stdout(&raw);
    assert!(body.starts_with("<html>") && body.contains("noaa memento C"), "{body}");
    assert!(body.contains("href=\"http://www.nhc.noaa.gov/\""));
    let rewritten = stdout(&memento(&args));
    assert!(rewritten.contains("Remediated: yes"));
    assert!(rewritten.contains("http://gateway.example/travel?uri=http%3A%2F%2Fwww.nhc.noaa.gov%2F"));
}

#[test]
fn now_advances_the_simulated_clock() {
    let o = memento(&[
        "travel",
        "http://vanished.example/",
        "--datetime",
        "Thu, 15 Oct 2009 00:00:00 GMT",
        "--scenario",
        "vanished-domain",
        "--now",
        "Thu, 15 Oct 2009 00:00:00 GMT",
        "--trace",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("Remediated: yes"), "{out}");
    assert!(out.contains("Memento-Datetime: Sun, 30 Aug 2009 20:00:00 GMT"), "{out}");
}

#[test]
fn timemap_prints_the_merged_map() {
    let o = memento(&["timemap", "http://www.noaa.gov/", "--scenario", "katrina"]);
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ms = json["mementos"].as_array().unwrap();
    assert_eq!(ms.len(), 4);
    let archives: Vec<&str> = ms.iter().map(|m| m["archive"].as_str().unwrap()).collect();
    assert_eq!(archives, ["archive-it.example", "ia.example", "ia.example", "archive-it.example"]);
}

#[test]
fn fetch_sends_a_plain_get() {
    let o = memento(&["fetch", "http://news.bbc.co.uk/", "--scenario", "flow5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("<html>"));
}

// Real sockets.

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn spawn(args: &[&str], addr: &str) -> Server {
    let child = Command::new(env!("CARGO_BIN_EXE_memento"))
        .args(args)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let server = Server(child);
    let deadline = Instant::now() + Duration::from_secs(10);
    while TcpStream::connect(addr).is_err() {
        assert!(Instant::now() < deadline, "server on {addr} never came up");
        sleep(Duration::from_millis(20));
    }
    server
}

struct Reply {
    status: u16,
    headers: Vec<(String, String)>,
    body: String,
}

impl Reply {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

fn http(addr: &str, method: &str, target: &str, headers: &[(&str, &str)], body: &[u8]) -> Reply {
    let mut s = TcpStream::connect(addr).unwrap();
    let mut head = format!("{method} {target} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Length: {}\r\n", body.len());
    for (n, v) in headers {
        head.push_str(&format!("{n}: {v}\r\n"));
    }
    head.push_str("\r\n");
    s.write_all(head.as_bytes()).unwrap();
    s.write_all(body).unwrap();
    let mut raw = Vec::new();
    s.read_to_end(&mut raw).unwrap();
    let text = String::from_utf8_lossy(&raw).into_owned();
    let (head, body) = text.split_once("\r\n\r\n").unwrap();
    let mut lines = head.lines();
    let status = lines.next().unwrap().split(' ').nth(1).unwrap().parse().unwrap();
    let headers = lines
        .filter_map(|l| l.split_once(':'))
        .map(|(n, v)| (n.trim().to_string(), v.trim().to_string()))
        .collect();
    Reply {
        status,
        headers,
        body: body.to_string(),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn travel_over_sockets_remediates_to_an_archive_server() {
    let dir = tempfile::tempdir().unwrap();
    let addr = format!("127.0.0.1:{}", free_port());
    let archive_cfg = write(
        dir.path(),
        "archive.toml",
        &format!("listen = \"{addr}\"\nbase_uri = \"http://{addr}\"\nstore_path = \"\"\n"),
    );
    let _archive = spawn(&["archive", "--config", &archive_cfg], &addr);
    // Nothing listens on the origin port, so hop 1 fails.
    let origin = format!("http://127.0.0.1:{}/p", free_port());
    let ingest = http(&addr, "POST", &format!("/ingest/{origin}"), &[("Content-Type", "text/html")], b"<html>captured</html>");
    assert_eq!(ingest.status, 201, "{}", ingest.body);
    let memento_uri = ingest.header("Location").unwrap().to_string();

    let bundle = http(&addr, "GET", &format!("/timebundle/{origin}"), &[], b"");
    assert_eq!(bundle.status, 303);
    let forced = http(
        &addr,
        "GET",
        &format!("/timegate/{origin}"),
        &[("X-Accept-Datetime", &format!("{{{TRAVEL_AT}}}")), ("Negotiate", "1.0")],
        b"",
    );
    assert_eq!((forced.status, forced.header("TCN")), (300, Some("list")));

    let gw_cfg = write(
        dir.path(),
        "gateway.toml",
        &format!("gateway_base = \"http://127.0.0.1:9\"\nfallback_timegate_base = \"http://{addr}\"\n"),
    );
    let o = memento(&["travel", &origin, "--datetime", TRAVEL_AT, "--config", &gw_cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains(&format!("URI-M: {memento_uri}")), "{out}");
    assert!(out.contains("Remediated: yes"));
    assert!(out.ends_with("<html>captured</html>"));
}

#[test]
fn serve_exposes_the_gateway_api() {
    let addr = format!("127.0.0.1:{}", free_port());
    let _gw = spawn(&["serve", "--scenario", "katrina", "--listen", &addr], &addr);
    let reply = http(
        &addr,
        "GET",
        "/travel?uri=http%3A%2F%2Fwww.noaa.gov%2F&datetime=Fri%2C%2009%20Sep%202005%2012%3A00%3A00%20GMT",
        &[],
        b"",
    );
    assert_eq!(reply.status, 200, "{}", reply.body);
    assert!(reply.body.contains("noaa memento C"));
    assert!(reply.body.contains(&format!("http://{addr}/travel?uri=http%3A%2F%2Fwww.nhc.noaa.gov%2F")));
    assert_eq!(reply.header("X-Memento-Datetime"), Some("Fri, 09 Sep 2005 01:58:48 GMT"));
    let id = reply.header("X-Travel-Id").unwrap().to_string();
    let trace = http(&addr, "GET", &format!("/trace/{id}"), &[], b"");
    assert_eq!(trace.status, 200);
    let json: serde_json::Value = serde_json::from_str(&trace.body).unwrap();
    assert_eq!(json["remediated"], true);
    assert!(json["hops"].as_array().unwrap().len() >= 3);
    let map = http(&addr, "GET", "/timemap?uri=http%3A%2F%2Fwww.noaa.gov%2F", &[], b"");
    assert_eq!(map.status, 200);
    assert!(map.body.contains("\"mementos\""));
}

#[test]
fn proxy_redirects_temporal_requests_and_forwards_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let upstream = format!("127.0.0.1:{}", free_port());
    let archive_cfg = write(
        dir.path(),
        "archive.toml",
        &format!("listen = \"{upstream}\"\nbase_uri = \"http://{upstream}\"\nstore_path = \"\"\n"),
    );
    let _archive = spawn(&["archive", "--config", &archive_cfg], &upstream);
    let policy = write(
        dir.path(),
        "policy.toml",
        "default = \"http://ta.example\"\n\n[[rules]]\npattern = \"*/special/*\"\ntimegate = \"http://special.example\"\n",
    );
    let addr = format!("127.0.0.1:{}", free_port());
    let _proxy = spawn(
        &["proxy", "--upstream", &format!("http://{upstream}"), "--policy", &policy, "--listen", &addr],
        &addr,
    );
    let plain = http(&addr, "GET", "/timemap/http://a.example/", &[], b"");
    assert_eq!(plain.status, 404);
    let ingest = http(&addr, "POST", "/ingest/http://a.example/", &[("Content-Type", "text/plain")], b"x");
    assert_eq!(ingest.status, 201);
    let plain = http(&addr, "GET", "/timemap/http://a.example/", &[], b"");
    assert_eq!(plain.status, 200);
    let temporal = http(&addr, "GET", "/page", &[("X-Accept-Datetime", &format!("{{{TRAVEL_AT}}}"))], b"");
    assert_eq!(temporal.status, 302);
    assert_eq!(
        temporal.header("Location"),
        Some(format!("http://ta.example/timegate/http://{addr}/page").as_str())
    );
    let special = http(&addr, "GET", "/special/x", &[("X-Accept-Datetime", &format!("{{{TRAVEL_AT}}}"))], b"");
    assert_eq!(
        special.header("Location"),
        Some(format!("http://special.example/timegate/http://{addr}/special/x").as_str())
    );
}

#[test]
fn aggregator_over_sockets_picks_across_archives() {
    let dir = tempfile::tempdir().unwrap();
    let mut servers = Vec::new();
    let mut addrs = Vec::new();
    for name in ["a", "b"] {
        let addr = format!("127.0.0.1:{}", free_port());
        let cfg = write(
            dir.path(),
            &format!("{name}.toml"),
            &format!("listen = \"{addr}\"\nbase_uri = \"http://{addr}\"\nstore_path = \"\"\n"),
        );
        servers.push(spawn(&["archive", "--config", &cfg], &addr));
        addrs.push(addr);
    }
    let uri_r = "http://origin.example/";
    let ingest = http(&addrs[1], "POST", &format!("/ingest/{uri_r}"), &[("Content-Type", "text/html")], b"only in b");
    assert_eq!(ingest.status, 201);
    let aggr = format!("127.0.0.1:{}", free_port());
    let cfg = write(
        dir.path(),
        "aggr.toml",
        &format!(
            "listen = \"{aggr}\"\nbase_uri = \"http://{aggr}\"\nttl = 60\n\n\
             [[archives]]\nid = \"a\"\nbase = \"http://{}\"\n\n[[archives]]\nid = \"b\"\nbase = \"http://{}\"\n",
            addrs[0], addrs[1]
        ),
    );
    let _aggr = spawn(&["aggregator", "--config", &cfg], &aggr);
    let reply = http(&aggr, "GET", &format!("/timegate/{uri_r}"), &[("X-Accept-Datetime", &format!("{{{TRAVEL_AT}}}"))], b"");
    assert_eq!(reply.status, 302, "{}", reply.body);
    assert_eq!(reply.header("Location"), ingest.header("Location"));
    assert_eq!(reply.header("X-Aggregator-Sources"), Some("a=empty, b=ok"));
}
