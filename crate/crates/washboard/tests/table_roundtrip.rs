use proptest::prelude::*;
use washboard::table::{Table, Value};

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        any::<f64>().prop_map(Value::Float),
        (-1e6..1e6f64).prop_map(Value::Float),
        any::<i64>().prop_map(Value::Int),
        "[a-z][a-z ,:\"]{0,20}"
            .prop_filter("reads back as a number", |s| s.parse::<f64>().is_err())
            .prop_map(Value::Text),
        Just(Value::Missing),
    ]
}

fn table() -> impl Strategy<Value = Table> {
    (1usize..6, 0usize..8).prop_flat_map(|(w, h)| {
        let columns = prop::collection::vec("[a-zA-Z_][a-zA-Z0-9_]{0,10}", w);
        let rows = prop::collection::vec(prop::collection::vec(value(), w), h);
        (columns, rows).prop_map(|(columns, rows)| Table { columns, rows })
    })
}

proptest! {
    #[test]
    fn csv_round_trip(t in table()) {
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = Table::read_csv(&buf[..]).unwrap();
        prop_assert!(back.same(&t), "{:?}\n{}", back, String::from_utf8_lossy(&buf));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        t.save(&path).unwrap();
        prop_assert!(Table::load(&path).unwrap().same(&t));
    }
}
