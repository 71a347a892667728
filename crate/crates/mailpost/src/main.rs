use std::io::BufRead;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let stdin = std::io::stdin();
    let mut stdin: Box<dyn BufRead> = Box::new(stdin.lock());
    let env = std::env::vars().collect();
    let mut io = mailpost::cli::CliIo::new(
        &mut out,
        &mut err,
        &mut stdin,
        env,
        mailpost::cli::tls_connector(),
    );
    std::process::exit(mailpost::cli::run(&args, &mut io));
}
