//! The chapters of `book/` as modules, so `cargo test` runs their samples.

macro_rules! chapters {
    ($($name:ident => $file:literal),* $(,)?) => {
        $(
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub mod $name {}
        )*
    };
}

chapters! {
    introduction => "introduction.md",
    pipeline => "pipeline.md",
    configuration => "configuration.md",
    formats => "formats.md",
    library => "library.md",
    explainers => "explainers.md",
    statistics => "statistics.md",
    gaze => "gaze.md",
    protocol => "protocol.md",
}
