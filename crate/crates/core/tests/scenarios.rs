//! End-to-end behaviour of the canned scenarios.

use memento_core::gateway::{Hop, TravelRequest, TRAVEL_ID_HEADER};
use memento_core::headers::{parse_interval, AGGREGATOR_SOURCES, LOCATION, TCN};
use memento_core::{load_canned, parse_http_date, DatetimeStamp, Handler, Request, Transport};

fn t(s: &str) -> DatetimeStamp {
    parse_http_date(s).unwrap()
}

fn statuses(hops: &[Hop]) -> Vec<Option<u16>> {
    hops.iter().map(|h| h.status).collect()
}

#[test]
fn flow1_self_timegate_two_hops() {
    let s = load_canned("flow1").unwrap();
    let (_, gw) = s.gateway().unwrap();
    let uri = "http://lanlsource.lanl.gov/hello";
    let m = gw.travel(&TravelRequest::at(uri, t("Mon, 12 Oct 2009 16:25:00 GMT"))).unwrap();
    assert_eq!(statuses(&m.trace.hops), [Some(302), Some(200)]);
    assert_eq!(m.trace.hops[0].tcn.as_deref(), Some("choice"));
    assert!(m.final_uri.starts_with("http://lanlsource.lanl.gov/memento/"));
    assert_eq!(m.memento_datetime, Some(t("Wed, 14 Oct 2009 08:30:00 GMT")));
    assert_eq!(m.body, b"<html><body>hello, version 3</body></html>");
    assert!(!m.remediated);
}

#[test]
fn flow2_redirects_to_archive_timegate() {
    let s = load_canned("flow2").unwrap();
    let (_, gw) = s.gateway().unwrap();
    let uri = "http://odusource.cs.odu.edu/demo.html";
    let m = gw.travel(&TravelRequest::at(uri, t("Thu, 01 Oct 2009 07:00:00 GMT"))).unwrap();
    assert_eq!(statuses(&m.trace.hops), [Some(302), Some(302), Some(200)]);
    assert_eq!(
        m.trace.hops[0].location.as_deref(),
        Some("http://ta.odu.example/timegate/http://odusource.cs.odu.edu/demo.html")
    );
    assert!(m.trace.hops[0].tcn.is_none());
    assert!(m.final_uri.starts_with("http://ta.odu.example/memento/"));
    assert_eq!(m.body, b"<html><body>demo, revision 2</body></html>");
}

#[test]
fn flow2_origin_pushes_served_bodies() {
    let s = load_canned("flow2").unwrap();
    let uri = "http://odusource.cs.odu.edu/demo.html";
    let before = s.archive("ta.odu.example").unwrap().store().entries(uri).len();
    let client = s.web.client("browser");
    let resp = client.send(Request::get(uri)).unwrap();
    assert_eq!(resp.body, b"<html><body>demo, current</body></html>");
    let entries = s.archive("ta.odu.example").unwrap().store().entries(uri);
    assert_eq!(entries.len(), before + 1);
    assert_eq!(entries.last().unwrap().datetime, s.web.now());
    // Serving the same body again only widens its validity.
    s.web.advance_by(60).unwrap();
    client.send(Request::get(uri)).unwrap();
    let entries = s.archive("ta.odu.example").unwrap().store().entries(uri);
    assert_eq!(entries.len(), before + 1);
    assert_eq!(entries.last().unwrap().validity.unwrap().until(), s.web.now());
}

#[test]
fn flow5_unaware_origin_is_remediated() {
    let s = load_canned("flow5").unwrap();
    let (_, gw) = s.gateway().unwrap();
    let m = gw
        .travel(&TravelRequest::at("http://news.bbc.co.uk/", t("Mon, 12 Oct 2009 16:25:00 GMT")))
        .unwrap();
    assert!(m.remediated);
    assert_eq!(m.trace.hops[0].status, Some(200));
    assert!(m.trace.hops[0].tcn.is_none());
    assert_eq!(m.trace.hops[1].request_uri, "http://aggr.example/timegate/http://news.bbc.co.uk/");
    assert!(m.final_uri.starts_with("http://ia.example/memento/"));
    assert_eq!(m.memento_datetime, Some(t("Tue, 13 Oct 2009 05:40:00 GMT")));
}

#[test]
fn katrina_aggregator_picks_across_archives() {
    let s = load_canned("katrina").unwrap();
    let client = s.web.client("browser");
    let uri = "http://aggr.example/timegate/http://www.noaa.gov/";
    let cases = [
        ("Fri, 09 Sep 2005 12:00:00 GMT", "ia.example", "Fri, 09 Sep 2005 01:58:48 GMT"),
        ("Fri, 09 Sep 2005 02:00:00 GMT", "ia.example", "Fri, 09 Sep 2005 01:58:48 GMT"),
        ("Thu, 08 Sep 2005 17:48:47 GMT", "archive-it.example", "Thu, 08 Sep 2005 17:48:47 GMT"),
        ("Mon, 01 Jan 2007 00:00:00 GMT", "archive-it.example", "Sat, 10 Sep 2005 08:11:47 GMT"),
    ];
    for (req, archive, expect) in cases {
        let resp = client
            .send(Request::get(uri).with_header("X-Accept-Datetime", format!("{{{req}}}")))
            .unwrap();
        assert_eq!(resp.status, 302, "{req}");
        assert_eq!(resp.header(TCN), Some("choice"));
        let loc = resp.header(LOCATION).unwrap();
        assert!(loc.starts_with(&format!("http://{archive}/memento/")), "{req} -> {loc}");
        assert!(resp.header("Alternates").unwrap().contains(expect));
        assert_eq!(
            resp.header(AGGREGATOR_SOURCES),
            Some("archive-it.example=ok, ia.example=ok")
        );
        // Storeless: the Location resolves on the member archive.
        assert_eq!(client.send(Request::get(loc)).unwrap().status, 200);
    }
}

#[test]
fn aggregator_cache_respects_ttl() {
    let s = load_canned("katrina").unwrap();
    let client = s.web.client("browser");
    let uri = "http://aggr.example/timemap/http://www.noaa.gov/";
    let upstream = |s: &memento_core::Scenario| s.web.log_from("aggr.example").len();
    client.send(Request::get(uri)).unwrap();
    let first = upstream(&s);
    assert_eq!(first, 4);
    s.web.advance_by(299).unwrap();
    client.send(Request::get(uri)).unwrap();
    client.send(Request::get(uri)).unwrap();
    assert_eq!(upstream(&s), first);
    s.web.advance_by(1).unwrap();
    client.send(Request::get(uri)).unwrap();
    assert_eq!(upstream(&s), 2 * first);
}

#[test]
fn aggregator_reports_failed_and_empty_sources() {
    let s = load_canned("katrina").unwrap();
    s.web.set_reachable("ia.example", false).unwrap();
    let client = s.web.client("browser");
    let resp = client
        .send(Request::get("http://aggr.example/timemap/http://www.noaa.gov/"))
        .unwrap();
    assert_eq!(resp.status, 200);
    assert_eq!(
        resp.header(AGGREGATOR_SOURCES),
        Some("archive-it.example=ok, ia.example=fail")
    );
    let resp = client
        .send(Request::get("http://aggr.example/timegate/http://unknown.example/"))
        .unwrap();
    assert_eq!(resp.status, 404);
    assert_eq!(
        resp.header(AGGREGATOR_SOURCES),
        Some("archive-it.example=empty, ia.example=fail")
    );
}

#[test]
fn vanished_domain_returns_latest() {
    let s = load_canned("vanished-domain").unwrap();
    s.web.advance_clock(t("Thu, 15 Oct 2009 00:00:00 GMT")).unwrap();
    assert_eq!(s.web.is_reachable("vanished.example"), Some(false));
    let (_, gw) = s.gateway().unwrap();
    let m = gw.travel(&TravelRequest::at("http://vanished.example/", s.web.now())).unwrap();
    assert!(m.remediated);
    assert_eq!(m.trace.hops[0].status, None);
    assert_eq!(m.memento_datetime, Some(t("Sun, 30 Aug 2009 20:00:00 GMT")));
    assert_eq!(m.body, b"<html><body>vanished, capture 3</body></html>");
}

#[test]
fn new_custodian_reroutes_to_aggregator() {
    let s = load_canned("new-custodian").unwrap();
    let (_, gw) = s.gateway().unwrap();
    let want = t("Wed, 01 Jun 2005 00:00:00 GMT");
    let m = gw.travel(&TravelRequest::at("http://custodian.example/", want)).unwrap();
    let first = &m.trace.hops[0];
    assert_eq!(first.tcn.as_deref(), Some("choice"));
    let iv = parse_interval(first.archive_interval.as_deref().unwrap()).unwrap();
    assert!(!iv.contains(want));
    assert!(m.rerouted);
    assert!(!m.remediated);
    assert!(m.final_uri.starts_with("http://ia.example/memento/"));
    assert_eq!(m.body, b"<html><body>old owner, capture 2</body></html>");
    // Within the new custodian's tenure the origin answers directly.
    let m = gw
        .travel(&TravelRequest::at("http://custodian.example/", t("Sun, 01 Mar 2009 00:00:00 GMT")))
        .unwrap();
    assert!(!m.rerouted);
    assert_eq!(m.trace.len(), 2);
}

#[test]
fn unknown_resource_is_no_memento() {
    let s = load_canned("katrina").unwrap();
    let (_, gw) = s.gateway().unwrap();
    let err = gw
        .travel(&TravelRequest::at("http://www.noaa.gov/missing", t("Fri, 09 Sep 2005 12:00:00 GMT")))
        .unwrap_err();
    assert!(matches!(err, memento_core::GatewayError::NoMementoFound { .. }), "{err}");
    assert_eq!(err.trace().unwrap().hops[0].status, Some(404));
}

#[test]
fn hop_limit_is_enforced() {
    let s = load_canned("flow2").unwrap();
    let (_, gw) = s.gateway().unwrap();
    let req = TravelRequest::at("http://odusource.cs.odu.edu/demo.html", t("Thu, 01 Oct 2009 07:00:00 GMT"))
        .with_max_hops(2);
    let err = gw.travel(&req).unwrap_err();
    match err {
        memento_core::GatewayError::HopLimitExceeded { max_hops, trace } => {
            assert_eq!(max_hops, 2);
            assert_eq!(trace.len(), 2);
        }
        other => panic!("{other}"),
    }
}

#[test]
fn gateway_http_api() {
    let s = load_canned("katrina").unwrap();
    let svc = s.gateway_service("gateway.example").unwrap();
    let resp = svc.handle(&Request::get(
        "http://gateway.example/travel?uri=http%3A%2F%2Fwww.noaa.gov%2F&datetime=Fri%2C%2009%20Sep%202005%2012%3A00%3A00%20GMT",
    ));
    assert_eq!(resp.status, 200);
    let body = String::from_utf8(resp.body.clone()).unwrap();
    assert!(body.contains("noaa memento C"));
    assert!(body.contains("href=\"http://gateway.example/travel?uri=http%3A%2F%2Fwww.nhc.noaa.gov%2F&datetime=Fri%2C%2009%20Sep%202005%2012%3A00%3A00%20GMT\""));
    let id = resp.header(TRAVEL_ID_HEADER).unwrap().to_string();
    let trace = svc.handle(&Request::get(format!("http://gateway.example/trace/{id}")));
    assert_eq!(trace.status, 200);
    let json: serde_json::Value = serde_json::from_slice(&trace.body).unwrap();
    assert_eq!(json["hops"].as_array().unwrap().len(), 3);
    assert_eq!(json["remediated"], true);

    let tm = svc.handle(&Request::get("http://gateway.example/timemap?uri=http%3A%2F%2Fwww.noaa.gov%2F"));
    assert_eq!(tm.status, 200);
    let map = memento_core::TimeMap::from_json(&tm.body).unwrap();
    assert_eq!(map.mementos.len(), 4);
    let owners: Vec<_> = map.mementos.iter().map(|m| m.archive.clone().unwrap()).collect();
    assert_eq!(owners, ["archive-it.example", "ia.example", "ia.example", "archive-it.example"]);

    let missing = svc.handle(&Request::get("http://gateway.example/travel?uri=http%3A%2F%2Fnope.example%2F"));
    assert_eq!(missing.status, 404);
    assert_eq!(svc.handle(&Request::get("http://gateway.example/travel")).status, 400);
    assert_eq!(svc.handle(&Request::get("http://gateway.example/trace/zzz")).status, 404);
}

#[test]
fn fetch_mode_sends_no_temporal_headers() {
    let s = load_canned("flow5").unwrap();
    let (_, gw) = s.gateway().unwrap();
    let (resp, trace) = gw.fetch("http://news.bbc.co.uk/").unwrap();
    assert_eq!(resp.status, 200);
    assert!(trace.hops[0].sent_headers.is_empty());
}
