mod criteria;

fn check(name: &str, result: criteria::Check) {
    match result {
        Ok(detail) => println!("{name}: {detail}"),
        Err(e) => panic!("{name}: {e}"),
    }
}

#[test]
fn codec_round_trips_and_rejects_bit_flips() {
    check("codec", criteria::codec_suite());
}

#[test]
fn channel_obeys_range_latency_rate_and_loss_laws() {
    check("channel", criteria::channel_laws());
}

#[test]
fn battery_endurance_at_cruise() {
    check("endurance", criteria::endurance());
}

#[test]
fn allocator_matches_brute_force() {
    check("allocator", criteria::allocator_oracle());
}

#[tokio::test]
async fn relay_forwards_byte_identical() {
    check("relay", criteria::relay_transparency().await);
}
