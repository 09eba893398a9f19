// ddse: command-line front end for the distinct searchable encryption
// database. The client state lives in <db>/state.ddse, encrypted under
// DDSE_PASSPHRASE; the server store defaults to <db>/edb.log or DDSE_STORE.

#include <CLI11.hpp>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "ddse/audit.hpp"
#include "ddse/edb.hpp"
#include "ddse/net.hpp"
#include "ddse/state_file.hpp"
#include "ddse/store.hpp"
#include "ddse/workload.hpp"

namespace fs = std::filesystem;
using namespace ddse;

namespace {

struct Db {
  fs::path dir;
  fs::path state() const { return dir / "state.ddse"; }
  fs::path manifest() const { return dir / "manifest.txt"; }
  fs::path store() const {
    if (const char* env = std::getenv("DDSE_STORE"); env && *env) return env;
    return dir / "edb.log";
  }
};

std::string passphrase() {
  const char* p = std::getenv("DDSE_PASSPHRASE");
  if (!p || !*p) throw InvalidArgument("DDSE_PASSPHRASE must be set to encrypt the client state");
  return p;
}

std::unique_ptr<edb::Registry> load(const Db& db) {
  if (!fs::exists(db.state())) throw InvalidArgument("no database at " + db.dir.string() + " (run setup first)");
  const auto plain = state_file::load(db.state(), passphrase());
  ByteReader r(plain);
  auto reg = edb::Registry::decode(r);
  r.expect_done();
  return reg;
}

void save(const Db& db, const edb::Registry& reg) {
  ByteWriter w;
  reg.encode_to(w);
  state_file::save(db.state(), w.bytes(), passphrase(), *crypto::system_random());
  std::ofstream(db.manifest(), std::ios::trunc) << reg.manifest();
}

// Either an in-process store on the db's log or a connection to `serve`.
std::unique_ptr<bfsre::ServerEndpoint> open_server(const Db& db, const std::string& connect) {
  if (!connect.empty()) return std::make_unique<net::RemoteEndpoint>(net::parse_host_port(connect));
  return std::make_unique<store::EdbServer>(db.store(), store::StoreOptions{});
}

void print_values(const std::vector<Bytes>& values) {
  for (const auto& v : values) std::cout << to_string(v) << '\n';
}

// One CSV record per call, RFC 4180 quoting. Returns false at end of input;
// sets `ok` to false for a malformed record (which is still consumed).
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, bool& ok, std::size_t& line) {
  fields.clear();
  ok = true;
  std::string field;
  bool quoted = false, any = false, after_quote = false;
  for (int ch; (ch = in.get()) != EOF;) {
    any = true;
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      after_quote = false;
    } else if (c == '\n') {
      ++line;
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(std::move(field));
      return true;
    } else if (c == '"' && field.empty() && !after_quote) {
      quoted = true;
    } else {
      if (after_quote && c != '\r') ok = false;
      field += c;
    }
  }
  if (!any) return false;
  if (quoted) ok = false;
  if (!field.empty() && field.back() == '\r') field.pop_back();
  fields.push_back(std::move(field));
  ++line;
  return true;
}

int run_serve(const std::string& listen, const std::string& store_path, bool fsync, std::size_t snapshot_every) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  store::EdbServer server(store_path, {fsync, snapshot_every});
  const auto& rec = server.recovery();
  std::cerr << "recovered " << rec.records << " log records" << (rec.from_snapshot ? " after snapshot" : "");
  if (rec.discarded_bytes) std::cerr << ", discarded " << rec.discarded_bytes << " bytes of torn tail";
  std::cerr << '\n';

  net::TcpServer tcp(server, net::parse_host_port(listen));
  std::cerr << "listening on port " << tcp.port() << '\n';
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    tcp.stop();
  });
  tcp.run();
  waiter.join();
  server.checkpoint();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distinct searchable encryption database"};
  app.require_subcommand(1);

  Db db;
  bool force = false;
  std::uint64_t bf_n = std::uint64_t{1} << 20;
  double bf_p = 1e-5;
  std::uint64_t dmax = 1024;
  auto* setup = app.add_subcommand("setup", "Create a database: keys, Distinct State and an empty store");
  setup->add_option("--db", db.dir, "Database directory")->required();
  setup->add_option("--bf-n", bf_n, "Distinct State capacity (distinct pairs)")->capture_default_str();
  setup->add_option("--bf-p", bf_p, "Distinct State false-positive rate")->capture_default_str();
  setup->add_option("--dmax", dmax, "Default revocations per keyword and epoch")->capture_default_str();
  setup->add_flag("--force", force, "Overwrite an existing database");

  std::string table, kcol, vcol, order = "lexicographic";
  std::optional<std::uint64_t> table_dmax;
  auto* reg_cmd = app.add_subcommand("register-table", "Add an encrypted (table, keyword, value) instance");
  reg_cmd->add_option("--db", db.dir, "Database directory")->required();
  reg_cmd->add_option("--table", table, "Table name")->required();
  reg_cmd->add_option("--keyword", kcol, "Keyword column")->required();
  reg_cmd->add_option("--value", vcol, "Value column")->required();
  reg_cmd->add_option("--order", order, "Value order: numeric or lexicographic")->capture_default_str();
  reg_cmd->add_option("--dmax", table_dmax, "Revocations per keyword and epoch for this instance");

  std::vector<std::string> statement;
  std::string connect;
  auto* exec = app.add_subcommand("exec", "Run one statement");
  exec->add_option("--db", db.dir, "Database directory")->required();
  exec->add_option("--connect", connect, "Use a running server at host:port");
  exec->add_option("statement", statement, "Statement text")->required();

  std::string csv_path, csv_kcol, csv_vcol;
  auto* ingest = app.add_subcommand("ingest", "Insert every row of a CSV file");
  ingest->add_option("--db", db.dir, "Database directory")->required();
  ingest->add_option("--table", table, "Table name")->required();
  ingest->add_option("--keyword", kcol, "Keyword column (needed if the table has several instances)");
  ingest->add_option("--value", vcol, "Value column");
  ingest->add_option("--connect", connect, "Use a running server at host:port");
  ingest->add_option("csv", csv_path, "CSV file with a header row")->required();

  workload::WorkloadSpec spec;
  std::string dist = "uniform", out_path, transcript_path;
  unsigned parallel = 1;
  auto add_spec = [&](CLI::App* cmd) {
    cmd->add_option("--W", spec.keywords, "Keyword space")->capture_default_str();
    cmd->add_option("--N", spec.pairs, "Total add operations")->capture_default_str();
    cmd->add_option("--rho", spec.duplicate_ratio, "Duplicate ratio in [0,1)")->capture_default_str();
    cmd->add_option("--dist", dist, "uniform or zipf[:S]")->capture_default_str();
    cmd->add_option("--delta", spec.delete_fraction, "Fraction of distinct pairs deleted")->capture_default_str();
    cmd->add_option("--seed", spec.seed, "Workload RNG seed")->capture_default_str();
    cmd->add_option("--out", out_path, "Report file (default: stdout)");
  };
  auto* bench = app.add_subcommand("bench", "Generate a workload, run it and report costs by keyword volume");
  add_spec(bench);
  bench->add_option("--db", db.dir, "Take BF and d_max parameters from this database");
  bench->add_option("--bf-n", bf_n, "Distinct State capacity")->capture_default_str();
  bench->add_option("--bf-p", bf_p, "Distinct State false-positive rate")->capture_default_str();
  bench->add_option("--dmax", dmax, "Revocations per keyword and epoch")->capture_default_str();
  bench->add_option("--parallel", parallel, "Concurrent searches")->capture_default_str();
  bench->add_option("--connect", connect, "Run against a server at host:port");

  std::uint64_t dwvh_trials = 0, dwvh_n = 256;
  auto* audit_cmd = app.add_subcommand("audit", "Record a workload transcript and report its leakage patterns");
  add_spec(audit_cmd);
  audit_cmd->add_option("--emit-transcript", transcript_path, "Write the raw frames, hex-encoded");
  audit_cmd->add_option("--dwvh-trials", dwvh_trials, "Also play this many random DwVH games");
  audit_cmd->add_option("--dwvh-n", dwvh_n, "Total pairs per DwVH signature")->capture_default_str();

  std::string listen = "127.0.0.1:7878", store_path;
  bool fsync = false;
  std::size_t snapshot_every = 0;
  auto* serve = app.add_subcommand("serve", "Serve an encrypted store over TCP");
  serve->add_option("--listen", listen, "host:port")->capture_default_str();
  serve->add_option("--store", store_path, "Store log (default: DDSE_STORE)");
  serve->add_flag("--fsync", fsync, "fsync the log before acknowledging");
  serve->add_option("--snapshot-every", snapshot_every, "Snapshot after this many records (0: on exit only)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*setup) {
      if (fs::exists(db.state()) && !force)
        throw InvalidArgument("database exists at " + db.dir.string() + " (use --force to overwrite)");
      bfsre::SchemeConfig config;
      config.distinct_capacity = bf_n;
      config.distinct_fp = bf_p;
      config.revocation_budget = dmax;
      config.reject_readd_after_delete = true;
      if (bf_n < 1) throw InvalidArgument("--bf-n must be at least 1");
      if (!(bf_p > 0 && bf_p < 1)) throw InvalidArgument("--bf-p must lie in (0, 1)");
      edb::Registry reg(config);
      fs::create_directories(db.dir);
      for (const auto& p : {db.store(), store::snapshot_path(db.store())}) fs::remove(p);
      store::StoreLog(db.store(), {}, 0);
      save(db, reg);
      std::cout << "initialized " << db.dir.string() << ": state " << fs::file_size(db.state()) << " bytes, "
                << "Distinct State " << reg.distinct().filter.bit_len() << " bits / "
                << reg.distinct().filter.hash_count() << " hashes\n";
    } else if (*reg_cmd) {
      auto reg = load(db);
      reg->register_table({table, kcol, vcol, edb::parse_order(order)}, table_dmax);
      save(db, *reg);
    } else if (*exec) {
      std::string text;
      for (const auto& part : statement) text += (text.empty() ? "" : " ") + part;
      query::Plan plan;
      try {
        plan = query::plan(text);
      } catch (const query::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n' << "  " << text << '\n' << "  " << std::string(e.position(), ' ') << "^\n";
        return 2;
      }
      auto reg = load(db);
      auto server = open_server(db, connect);
      const auto rows = edb::execute(plan, *reg, *server);
      save(db, *reg);  // searches rotate epochs, so every statement changes state
      print_values(rows);
    } else if (*ingest) {
      auto reg = load(db);
      edb::Instance* in = nullptr;
      if (!kcol.empty() || !vcol.empty()) {
        in = reg->find(table, kcol, vcol);
      } else {
        for (const auto* candidate : reg->instances()) {
          if (candidate->schema.name != table) continue;
          if (in) throw InvalidArgument("table '" + table + "' has several instances; pass --keyword and --value");
          in = const_cast<edb::Instance*>(candidate);
        }
      }
      if (!in) throw InvalidArgument("no matching instance of table '" + table + "'");
      std::ifstream csv(csv_path, std::ios::binary);
      if (!csv) throw StorageError("cannot read " + csv_path);
      auto server = open_server(db, connect);

      std::vector<std::string> fields;
      bool ok = true;
      std::size_t line = 0, count = 0, skipped = 0;
      long kidx = -1, vidx = -1;
      std::size_t width = 0;
      if (read_csv_record(csv, fields, ok, line)) {
        if (!ok) throw InvalidArgument("malformed CSV header");
        width = fields.size();
        for (std::size_t i = 0; i < fields.size(); ++i) {
          if (fields[i] == in->schema.keyword_column) kidx = static_cast<long>(i);
          if (fields[i] == in->schema.value_column) vidx = static_cast<long>(i);
        }
        if (kidx < 0 || vidx < 0)
          throw InvalidArgument("CSV header lacks column '" +
                                (kidx < 0 ? in->schema.keyword_column : in->schema.value_column) + "'");
      }
      query::Plan plan;
      plan.syn = query::Syn::ins;
      plan.table = in->schema.name;
      plan.key = {in->schema.name, in->schema.keyword_column};
      plan.value = {in->schema.name, in->schema.value_column};
      while (read_csv_record(csv, fields, ok, line)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (!ok || fields.size() != width) {
          warn("skipping malformed CSV row ending at line " + std::to_string(line));
          ++skipped;
          continue;
        }
        plan.keyword = to_bytes(fields[static_cast<std::size_t>(kidx)]);
        plan.literal = to_bytes(fields[static_cast<std::size_t>(vidx)]);
        edb::exec_insert(plan, *reg, *server);
        ++count;
      }
      save(db, *reg);
      std::cout << count << '\n';
      if (skipped) std::cerr << skipped << " malformed rows skipped\n";
    } else if (*bench) {
      workload::parse_distribution(dist, spec);
      workload::BenchOptions opt;
      if (!db.dir.empty()) {
        opt.config = load(db)->defaults();
      } else {
        opt.config.distinct_capacity = bf_n;
        opt.config.distinct_fp = bf_p;
        opt.config.revocation_budget = dmax;
      }
      opt.parallel = parallel;
      if (!connect.empty()) {
        const auto hp = net::parse_host_port(connect);
        opt.connect = [hp] { return std::make_unique<net::RemoteEndpoint>(hp); };
      }
      const auto rep = workload::run_bench(spec, opt);
      if (out_path.empty()) {
        std::cout << rep.to_lines();
      } else {
        std::ofstream(out_path) << rep.to_lines();
      }
    } else if (*audit_cmd) {
      workload::parse_distribution(dist, spec);
      auto wl = workload::generate(spec);
      for (std::uint64_t k = 0; k < spec.keywords; ++k) wl.push_back(audit::Step::find(workload::keyword_name(k)));
      bfsre::SchemeConfig config;
      config.distinct_capacity = std::max<std::uint64_t>(spec.pairs, 1024);
      config.revocation_budget = dmax;
      const auto t = audit::record(wl, config, spec.seed);
      const auto renamed = audit::record(audit::rename_keywords(wl), config, spec.seed);
      const auto report = audit::compute_patterns(t).to_lines();
      if (out_path.empty()) {
        std::cout << report;
      } else {
        std::ofstream(out_path) << report;
      }
      if (!transcript_path.empty()) std::ofstream(transcript_path) << t.dump();
      bool all_pass = true;
      const auto fp = audit::fp_check(t, &renamed);
      std::cerr << "fp_check: " << (fp.pass ? "PASS" : "FAIL") << '\n';
      for (const auto& r : fp.reasons) std::cerr << "  " << r << '\n';
      all_pass &= fp.pass;
      std::mt19937_64 rng(spec.seed);
      std::uint64_t passed = 0;
      for (std::uint64_t i = 0; i < dwvh_trials; ++i) {
        const auto [s0, s1] = audit::random_signatures(dwvh_n, 8, rng);
        audit::Workload script;
        for (const auto& [w, e] : s0) script.push_back({audit::Step::search, bfsre::Op::add, w, {}});
        passed += audit::dwvh_game(dwvh_n, s0, s1, script, config, spec.seed + i).verdict.pass;
      }
      if (dwvh_trials) {
        std::cerr << "dwvh_game: " << passed << "/" << dwvh_trials << " PASS\n";
        all_pass &= passed == dwvh_trials;
      }
      return all_pass ? 0 : 1;
    } else if (*serve) {
      if (store_path.empty()) {
        const char* env = std::getenv("DDSE_STORE");
        if (!env || !*env) throw InvalidArgument("pass --store or set DDSE_STORE");
        store_path = env;
      }
      return run_serve(listen, store_path, fsync, snapshot_every);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
