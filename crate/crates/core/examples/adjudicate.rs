fn main() {
    let r = mecat_core::expm::adjudicate_splittings(1e-10).unwrap();
    println!("{}", serde_json::to_string_pretty(&r).unwrap());
}
