use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("manifest dir"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("GEARFUSE_H".into()),
        cpp_compat: true,
        documentation: true,
        enumeration: cbindgen::EnumConfig { prefix_with_name: true, ..Default::default() },
        ..Default::default()
    };
    match cbindgen::Builder::new().with_crate(&crate_dir).with_config(config).generate() {
        Ok(bindings) => {
            std::fs::create_dir_all(crate_dir.join("include")).expect("include dir");
            bindings.write_to_file(crate_dir.join("include/gearfuse.h"));
        }
        // keep building when the header cannot be generated (e.g. a parse
        // hiccup mid-edit); the checked-in header stays as it was
        Err(e) => println!("cargo:warning=cbindgen: {e}"),
    }
}
