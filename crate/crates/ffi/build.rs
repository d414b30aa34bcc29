fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let crate_path = std::path::Path::new(&crate_dir);
    let config = cbindgen::Config::from_file(crate_path.join("cbindgen.toml")).expect("could not read cbindgen.toml");

    let bindings = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("unable to generate bindings");
    std::fs::create_dir_all(crate_path.join("include")).expect("could not create include/");
    bindings.write_to_file(crate_path.join("include/orthopair.h"));

    println!("cargo:rerun-if-changed=cbindgen.toml");
    println!("cargo:rerun-if-changed=src/lib.rs");
}
