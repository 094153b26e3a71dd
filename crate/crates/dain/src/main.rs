fn main() {
    env_logger::Builder::new().parse_filters(&std::env::var("DAIN_LOG").unwrap_or_else(|_| "warn".into())).format_timestamp(None).init();
    let code = dain::cli::dispatch(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
