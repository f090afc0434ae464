#[test]
fn thin_net_context_builds() {
    let (model, level, ctx) = openorbit_bench::thin_net(24);
    assert!(model.evaluate(&openorbit::Vec3::zeros()).is_finite());
    assert_eq!(ctx.level, level);
}
