// Command-line front end: generate or ingest matrices, run the simulator and
// the native backend, verify against the brute-force references, sweep
// parameter grids, and emit machine-readable reports (JSON-lines + CSV).
//
// Exit codes: 0 success, 1 usage error, 2 input error, 3 verification failure.

#include "spmm/spmm.hpp"
#include "spmm/stats.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace spmm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitVerify = 3;

/// Flag-combination problems; mapped to the usage exit code.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string iso_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

u64 default_seed() {
  if (const char* env = std::getenv("SPMM_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(std::string("SPMM_SEED is not a valid integer: '") + env + "'");
    }
  }
  return 1;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string hex_checksum(u64 v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct RunSettings {
  std::string input_descriptor;
  std::optional<GraphGenSpec> generator;  // set when the input was generated
  u32 m = 0, k = 0, n = 0;
  u64 nnz = 0;
  std::string backend;  // "sim" | "native"
  KernelVariant variant;
  std::string op;
  u32 warp_size = 32;
  u32 warps_per_block = 8;
  u64 b_seed = 42;
  u32 workers = 0;   // native
  u32 repeats = 0;   // native
  std::string verification = "none";
  std::string error;
};

json metrics_json(const SimMetrics& m) {
  const MetricsReport rep = metrics_report(m);
  json per;
  for (int i = 0; i < kArrayCount; ++i) {
    const auto id = static_cast<ArrayId>(i);
    json cnt;
    if (id != ArrayId::C) {
      cnt["load_transactions"] = m.loads(id).transactions;
      cnt["load_requested_bytes"] = m.loads(id).requested_bytes;
      cnt["load_transferred_bytes"] = m.loads(id).transferred_bytes;
    } else {
      cnt["store_transactions"] = m.stores(id).transactions;
      cnt["store_requested_bytes"] = m.stores(id).requested_bytes;
      cnt["store_transferred_bytes"] = m.stores(id).transferred_bytes;
    }
    per[array_name(id)] = std::move(cnt);
  }
  return json{{"gld_transactions", m.gld_transactions},
              {"gst_transactions", m.gst_transactions},
              {"requested_load_bytes", m.requested_load_bytes},
              {"transferred_load_bytes", m.transferred_load_bytes},
              {"requested_store_bytes", m.requested_store_bytes},
              {"transferred_store_bytes", m.transferred_store_bytes},
              {"gld_efficiency", rep.gld_efficiency},
              {"gst_efficiency", rep.gst_efficiency},
              {"shared_loads", m.shared_loads},
              {"shared_stores", m.shared_stores},
              {"per_array", std::move(per)},
              {"consistent", rep.consistent}};
}

json base_record(const RunSettings& s) {
  json rec;
  rec["tool"] = kToolName;
  rec["version"] = kToolVersion;
  rec["timestamp"] = iso_timestamp();
  if (s.generator) {
    rec["input"] = {{"generator",
                     {{"rows", s.generator->n_rows},
                      {"nnz", s.generator->nnz_target},
                      {"seed", s.generator->seed},
                      {"self_loops", s.generator->self_loops}}}};
  } else {
    rec["input"] = {{"path", s.input_descriptor}};
  }
  rec["m"] = s.m;
  rec["k"] = s.k;
  rec["n"] = s.n;
  rec["nnz"] = s.nnz;
  rec["backend"] = s.backend;
  rec["variant"] = s.variant.name();
  rec["cf"] = s.variant.cf_effective();
  rec["op"] = s.op;
  rec["warp_size"] = s.warp_size;
  rec["warps_per_block"] = s.warps_per_block;
  rec["b_seed"] = s.b_seed;
  return rec;
}

// CSV with the same values as the JSON-lines records, one flat row each.
const char* kCsvHeader =
    "matrix,backend,variant,cf,op,m,k,n,nnz,warp_size,warps_per_block,b_seed,"
    "gld_transactions,gst_transactions,requested_load_bytes,transferred_load_bytes,"
    "gld_efficiency,shared_loads,shared_stores,rowptr_load_tx,colind_load_tx,val_load_tx,"
    "b_load_tx,c_store_tx,workers,repeats,elapsed_s,gflops,checksum,verification,error";

struct CsvRow {
  RunSettings s;
  std::optional<SimMetrics> sim;
  std::optional<ThroughputReport> native;
};

// RFC-4180 quoting for fields that carry commas or quotes (descriptors,
// error messages).
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_line(const CsvRow& row) {
  const auto& s = row.s;
  std::ostringstream os;
  os << csv_field(s.input_descriptor) << ',' << s.backend << ',' << s.variant.name() << ','
     << s.variant.cf_effective() << ',' << s.op << ',' << s.m << ',' << s.k << ',' << s.n << ','
     << s.nnz << ',' << s.warp_size << ',' << s.warps_per_block << ',' << s.b_seed << ',';
  if (row.sim) {
    const auto& m = *row.sim;
    os << m.gld_transactions << ',' << m.gst_transactions << ',' << m.requested_load_bytes << ','
       << m.transferred_load_bytes << ',' << fmt_double(m.gld_efficiency()) << ','
       << m.shared_loads << ',' << m.shared_stores << ','
       << m.loads(ArrayId::RowPtr).transactions << ',' << m.loads(ArrayId::ColInd).transactions
       << ',' << m.loads(ArrayId::Val).transactions << ',' << m.loads(ArrayId::B).transactions
       << ',' << m.stores(ArrayId::C).transactions << ',';
  } else {
    os << ",,,,,,,,,,,,";
  }
  if (row.native) {
    os << s.workers << ',' << s.repeats << ',' << fmt_double(row.native->elapsed_s) << ','
       << fmt_double(row.native->gflops) << ',' << hex_checksum(row.native->output_checksum)
       << ',';
  } else {
    os << ",,,,,";
  }
  os << s.verification << ',' << csv_field(s.error);
  return os.str();
}

// ---------------------------------------------------------------------------
// Shared input handling
// ---------------------------------------------------------------------------

struct LoadedMatrix {
  CsrMatrix m;
  std::string descriptor;
  std::optional<GraphGenSpec> generator;
};

// "gen:rows=R,nnz=Z,seed=S[,self-loops]" builds the matrix in memory, so a
// record's input descriptor alone is enough to reproduce a run.
GraphGenSpec parse_gen_descriptor(const std::string& body) {
  GraphGenSpec spec;
  bool have_rows = false, have_nnz = false;
  for (const auto& field : split_list(body)) {
    if (field == "self-loops") {
      spec.self_loops = true;
      continue;
    }
    const auto eq = field.find('=');
    if (eq == std::string::npos)
      throw Error("bad generator field '" + field + "' (want key=value or self-loops)");
    const std::string key = field.substr(0, eq);
    u64 value = 0;
    try {
      value = std::stoull(field.substr(eq + 1));
    } catch (const std::exception&) {
      throw Error("bad generator value in '" + field + "'");
    }
    if (key == "rows") {
      if (value > 0xffffffffull) throw Error("generator rows exceed 32-bit range");
      spec.n_rows = static_cast<u32>(value);
      have_rows = true;
    } else if (key == "nnz") {
      spec.nnz_target = value;
      have_nnz = true;
    } else if (key == "seed") {
      spec.seed = value;
    } else {
      throw Error("unknown generator field '" + key + "'");
    }
  }
  if (!have_rows || !have_nnz) throw Error("generator descriptor needs rows= and nnz=");
  return spec;
}

LoadedMatrix load_input(const std::string& path) {
  LoadedMatrix lm;
  if (path.rfind("gen:", 0) == 0) {
    lm.generator = parse_gen_descriptor(path.substr(4));
    lm.m = gen_uniform_random(*lm.generator);
  } else {
    lm.m = load_matrix(path);
  }
  lm.descriptor = path;
  return lm;
}

struct Divergence {
  bool found = false;
  u32 i = 0, j = 0;
  float got = 0.0f, want = 0.0f;
};

Divergence first_divergence(const DenseMatrix& got, const DenseMatrix& want) {
  Divergence d;
  for (u32 i = 0; i < want.n_rows; ++i)
    for (u32 j = 0; j < want.n_cols; ++j) {
      const float g = got.at(i, j), w = want.at(i, j);
      if (std::memcmp(&g, &w, sizeof(float)) != 0) return {true, i, j, g, w};
    }
  return d;
}

std::vector<KernelVariant> parse_variants(const std::string& list, const std::string& cf_list,
                                          u32 n_for_auto) {
  std::vector<u32> cfs;
  for (const auto& c : split_list(cf_list)) {
    try {
      cfs.push_back(static_cast<u32>(std::stoul(c)));
    } catch (const std::exception&) {
      throw Error("bad --cf value '" + c + "'");
    }
  }
  if (cfs.empty()) cfs.push_back(2);

  std::vector<KernelVariant> out;
  for (const auto& name : split_list(list)) {
    if (name == "auto") {
      out.push_back(select_variant(n_for_auto));
    } else if (name == "crc-cwm") {
      for (u32 cf : cfs) out.push_back(KernelVariant::crc_cwm(cf));
    } else {
      out.push_back(variant_by_name(name));
    }
  }
  if (out.empty()) throw Error("no variants given");
  return out;
}

std::ostream& open_or_stdout(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw Error("cannot open '" + path + "' for writing");
  return file;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenArgs {
  u64 rows = 0;
  u64 nnz = 0;
  u64 seed = 0;
  bool seed_given = false;
  bool self_loops = false;
  std::string output;
};

int cmd_gen(const GenArgs& a) {
  GraphGenSpec spec;
  if (a.rows > 0xffffffffull) throw Error("--rows exceeds 32-bit range");
  spec.n_rows = static_cast<u32>(a.rows);
  spec.nnz_target = a.nnz;
  spec.seed = a.seed_given ? a.seed : default_seed();
  spec.self_loops = a.self_loops;

  const CsrMatrix m = gen_uniform_random(spec);
  save_csr_cache(a.output, m);
  std::cout << "wrote " << a.output << ": rows=" << m.n_rows << " cols=" << m.n_cols
            << " nnz=" << m.nnz() << " mean_degree=" << fmt_double(m.mean_degree())
            << " seed=" << spec.seed << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string matrix;
  std::string n_list;
  std::string variants = "auto";
  std::string cf_list = "2";
  std::string op = "sum";
  u32 warp_size = 32;
  u32 warps_per_block = 8;
  bool parallel = false;
  std::string trace_path;
  std::string csv_path;
  std::string out_path;
  u64 b_seed = 42;
};

std::vector<u32> parse_n_list(const std::string& list) {
  std::vector<u32> out;
  for (const auto& t : split_list(list)) {
    try {
      out.push_back(static_cast<u32>(std::stoul(t)));
    } catch (const std::exception&) {
      throw Error("bad -N value '" + t + "'");
    }
  }
  if (out.empty()) throw Error("-N requires at least one value");
  return out;
}

int cmd_simulate(const SimulateArgs& a) {
  const LoadedMatrix in = load_input(a.matrix);
  const std::vector<u32> ns = parse_n_list(a.n_list);
  const ReduceOp op = reduce_op_by_name(a.op);

  std::ofstream out_file;
  std::ostream& out = open_or_stdout(a.out_path, out_file);
  std::ofstream csv_file;
  std::ostream* csv = nullptr;
  if (!a.csv_path.empty()) {
    csv_file.open(a.csv_path);
    if (!csv_file) throw Error("cannot open '" + a.csv_path + "' for writing");
    csv_file << kCsvHeader << "\n";
    csv = &csv_file;
  }

  size_t combos = 0;
  for (u32 n : ns) combos += parse_variants(a.variants, a.cf_list, n).size();
  if (!a.trace_path.empty() && combos != 1)
    throw UsageError("--trace requires exactly one (variant, N) combination");

  for (u32 n : ns) {
    for (const KernelVariant& v : parse_variants(a.variants, a.cf_list, n)) {
      KernelConfig cfg{a.warp_size, a.warps_per_block, v};
      const DenseMatrix b = make_random_dense(in.m.n_cols, n, a.b_seed);

      SimOptions opts;
      opts.parallel = a.parallel;
      std::ofstream trace_file;
      TraceSink sink;
      if (!a.trace_path.empty()) {
        trace_file.open(a.trace_path);
        if (!trace_file) throw Error("cannot open '" + a.trace_path + "' for writing");
        sink = text_trace_sink(trace_file, true);
        opts.trace = &sink;
      }

      const SimResult res = run_kernel(in.m, b, cfg, op, opts);

      RunSettings s;
      s.input_descriptor = in.descriptor;
      s.generator = in.generator;
      s.m = in.m.n_rows;
      s.k = in.m.n_cols;
      s.n = n;
      s.nnz = in.m.nnz();
      s.backend = "sim";
      s.variant = v;
      s.op = a.op;
      s.warp_size = a.warp_size;
      s.warps_per_block = a.warps_per_block;
      s.b_seed = a.b_seed;

      json rec = base_record(s);
      rec["sim"] = metrics_json(res.metrics);
      rec["verification"] = s.verification;
      out << rec.dump() << "\n";
      if (csv) *csv << csv_line({s, res.metrics, std::nullopt}) << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string matrix;
  u32 n = 0;
  std::string ops = "sum,max";
  std::string fault = "none";
  u32 warp_size = 32;
  u32 warps_per_block = 8;
  u64 b_seed = 42;
  u32 workers = 0;
};

int cmd_verify(const VerifyArgs& a) {
  const LoadedMatrix in = load_input(a.matrix);
  if (a.n < 1) throw Error("-N must be >= 1");

  FaultMode fault = FaultMode::None;
  if (a.fault == "skip-tail") fault = FaultMode::SkipTail;
  else if (a.fault != "none") throw Error("--fault must be none or skip-tail");

  const std::vector<KernelVariant> variants = {
      KernelVariant::naive(), KernelVariant::crc(), KernelVariant::crc_cwm(2),
      KernelVariant::crc_cwm(4), KernelVariant::crc_cwm(8)};

  const DenseMatrix b = make_random_dense(in.m.n_cols, a.n, a.b_seed);
  bool all_ok = true;

  for (const auto& op_name : split_list(a.ops)) {
    const ReduceOp op = reduce_op_by_name(op_name);
    const DenseMatrix want = dense_reference(in.m, b, op);

    for (const KernelVariant& v : variants) {
      KernelConfig cfg{a.warp_size, a.warps_per_block, v};

      const auto trace_path = fs::temp_directory_path() /
                              ("spmm_verify_trace_" + std::to_string(::getpid()) + ".txt");
      SimMetrics engine_metrics;
      DenseMatrix sim_c;
      {
        std::ofstream trace_out(trace_path);
        TraceSink sink = text_trace_sink(trace_out, true);
        SimOptions opts;
        opts.trace = &sink;
        opts.fault = fault;
        SimResult res = run_kernel(in.m, b, cfg, op, opts);
        engine_metrics = res.metrics;
        sim_c = std::move(res.c);
      }

      std::ifstream trace_in(trace_path);
      const TraceTotals recount = recount_trace(trace_in);
      trace_in.close();
      fs::remove(trace_path);

      bool trace_ok = recount.total_load_transactions() == engine_metrics.gld_transactions &&
                      recount.total_store_transactions() == engine_metrics.gst_transactions &&
                      recount.total_load_requested() == engine_metrics.requested_load_bytes;
      for (int i = 0; i < kArrayCount && trace_ok; ++i) {
        const auto id = static_cast<ArrayId>(i);
        trace_ok = recount.load_transactions[i] == engine_metrics.loads(id).transactions &&
                   recount.store_transactions[i] == engine_metrics.stores(id).transactions;
      }
      if (!trace_ok) {
        std::cout << "verify FAILED: trace recount mismatch: variant=" << v.name()
                  << " cf=" << v.cf_effective() << " op=" << op_name
                  << " (engine gld=" << engine_metrics.gld_transactions
                  << " recount=" << recount.total_load_transactions() << ")\n";
        all_ok = false;
      }

      const DenseMatrix native_c = native_spmm(in.m, b, v, op, a.workers, {fault});

      for (const auto& [backend, c] :
           {std::pair<const char*, const DenseMatrix*>{"sim", &sim_c}, {"native", &native_c}}) {
        const Divergence d = first_divergence(*c, want);
        if (d.found) {
          std::cout << "verify FAILED: variant=" << v.name() << " cf=" << v.cf_effective()
                    << " backend=" << backend << " op=" << op_name << " first divergence at ("
                    << d.i << ", " << d.j << "): got " << fmt_double(d.got) << " expected "
                    << fmt_double(d.want) << "\n";
          all_ok = false;
        }
      }
    }
  }

  if (all_ok) {
    std::cout << "verify PASSED: " << in.descriptor << " N=" << a.n
              << " (5 variants x 2 backends x {" << a.ops << "}, trace recount exact)\n";
    return kExitOk;
  }
  return kExitVerify;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string matrix;
  std::string n_list;
  std::string variants = "auto";
  std::string cf_list = "2";
  std::string op = "sum";
  u32 workers = 0;
  u32 repeats = 9;
  u64 b_seed = 42;
  std::string out_path;
};

int cmd_bench(const BenchArgs& a) {
  const LoadedMatrix in = load_input(a.matrix);
  const ReduceOp op = reduce_op_by_name(a.op);

  std::ofstream out_file;
  std::ostream& out = open_or_stdout(a.out_path, out_file);

  for (u32 n : parse_n_list(a.n_list)) {
    const DenseMatrix b = make_random_dense(in.m.n_cols, n, a.b_seed);
    double baseline_elapsed = 0.0;
    bool first = true;
    for (const KernelVariant& v : parse_variants(a.variants, a.cf_list, n)) {
      const ThroughputReport rep = bench(in.m, b, v, op, a.workers, a.repeats);

      RunSettings s;
      s.input_descriptor = in.descriptor;
      s.generator = in.generator;
      s.m = in.m.n_rows;
      s.k = in.m.n_cols;
      s.n = n;
      s.nnz = in.m.nnz();
      s.backend = "native";
      s.variant = v;
      s.op = a.op;
      s.b_seed = a.b_seed;
      s.workers = a.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : a.workers;
      s.repeats = a.repeats;

      json rec = base_record(s);
      rec["native"] = {{"workers", s.workers},
                       {"repeats", rep.repeats},
                       {"elapsed_s", rep.elapsed_s},
                       {"elapsed_mean_s", rep.elapsed_mean_s},
                       {"flops", rep.flops},
                       {"gflops", rep.gflops},
                       {"checksum", hex_checksum(rep.output_checksum)}};
      if (first) {
        baseline_elapsed = rep.elapsed_s;
        first = false;
      } else if (rep.elapsed_s > 0.0) {
        rec["native"]["speedup_vs_first"] = baseline_elapsed / rep.elapsed_s;
      }
      rec["verification"] = "none";
      out << rec.dump() << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
  std::vector<std::string> matrices;
  std::string n_list;
  std::string variants = "naive,crc,crc-cwm";
  std::string cf_list = "2";
  std::string backend = "sim";
  std::string op = "sum";
  u32 workers = 0;
  u32 repeats = 3;
  u64 b_seed = 42;
  bool verify = false;
  std::string csv_path;
  std::string jsonl_path;
};

struct SweepCell {
  CsvRow row;
  json rec;
};

int cmd_sweep(const SweepArgs& a) {
  if (a.backend != "sim" && a.backend != "native" && a.backend != "both")
    throw Error("--backend must be sim, native or both");
  const ReduceOp op = reduce_op_by_name(a.op);
  const std::vector<u32> ns = parse_n_list(a.n_list);

  std::ofstream csv_file;
  std::ostream& csv = open_or_stdout(a.csv_path, csv_file);
  std::ofstream jsonl_file;
  std::ostream* jsonl = nullptr;
  if (!a.jsonl_path.empty()) {
    jsonl_file.open(a.jsonl_path);
    if (!jsonl_file) throw Error("cannot open '" + a.jsonl_path + "' for writing");
    jsonl = &jsonl_file;
  }

  std::vector<std::string> backends;
  if (a.backend == "both") backends = {"sim", "native"};
  else backends = {a.backend};

  std::vector<SweepCell> cells;
  for (const auto& path : a.matrices) {
    std::optional<LoadedMatrix> in;
    std::string load_error;
    try {
      in = load_input(path);
    } catch (const Error& e) {
      load_error = e.what();
    }

    for (u32 n : ns) {
      for (const KernelVariant& v : parse_variants(a.variants, a.cf_list, n)) {
        for (const auto& backend : backends) {
          SweepCell cell;
          RunSettings& s = cell.row.s;
          s.input_descriptor = path;
          s.backend = backend;
          s.variant = v;
          s.op = a.op;
          s.n = n;
          s.b_seed = a.b_seed;
          if (!in) {
            s.error = load_error;
            cell.rec = base_record(s);
            cell.rec["error"] = load_error;
            cells.push_back(std::move(cell));
            continue;
          }
          s.generator = in->generator;
          s.m = in->m.n_rows;
          s.k = in->m.n_cols;
          s.nnz = in->m.nnz();
          try {
            const DenseMatrix b = make_random_dense(in->m.n_cols, n, a.b_seed);
            std::optional<DenseMatrix> c;
            if (backend == "sim") {
              KernelConfig cfg{32, 8, v};
              SimResult res = run_kernel(in->m, b, cfg, op);
              cell.row.sim = res.metrics;
              c = std::move(res.c);
            } else {
              s.workers =
                  a.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : a.workers;
              s.repeats = a.repeats;
              cell.row.native = bench(in->m, b, v, op, a.workers, a.repeats);
              c = native_spmm(in->m, b, v, op, a.workers);
            }
            if (a.verify) {
              try {
                const DenseMatrix want = dense_reference(in->m, b, op);
                const Divergence d = first_divergence(*c, want);
                s.verification = d.found ? "fail" : "pass";
              } catch (const Error& e) {
                s.verification = "error";
                s.error = e.what();
              }
            }
          } catch (const Error& e) {
            s.error = e.what();
          }
          cell.rec = base_record(s);
          if (cell.row.sim) cell.rec["sim"] = metrics_json(*cell.row.sim);
          if (cell.row.native) {
            const auto& rep = *cell.row.native;
            cell.rec["native"] = {{"workers", s.workers},
                                  {"repeats", rep.repeats},
                                  {"elapsed_s", rep.elapsed_s},
                                  {"elapsed_mean_s", rep.elapsed_mean_s},
                                  {"flops", rep.flops},
                                  {"gflops", rep.gflops},
                                  {"checksum", hex_checksum(rep.output_checksum)}};
          }
          cell.rec["verification"] = s.verification;
          if (!s.error.empty()) cell.rec["error"] = s.error;
          cells.push_back(std::move(cell));
        }
      }
    }
  }

  csv << kCsvHeader << "\n";
  for (const auto& cell : cells) {
    csv << csv_line(cell.row) << "\n";
    if (jsonl) *jsonl << cell.rec.dump() << "\n";
  }

  // Geometric-mean summary rows per (backend, variant, cf, N) over matrices
  // that produced data. Column indices follow kCsvHeader.
  enum CsvCol {
    kColMatrix = 0, kColBackend, kColVariant, kColCf, kColOp, kColM, kColK, kColN, kColNnz,
    kColWarpSize, kColWpb, kColBSeed, kColGld, kColGst, kColReqLoad, kColTransfLoad, kColEff,
    kColSharedLoads, kColSharedStores, kColRowPtrTx, kColColIndTx, kColValTx, kColBTx, kColCTx,
    kColWorkers, kColRepeats, kColElapsed, kColGflops, kColChecksum, kColVerification, kColError,
    kColCount
  };
  for (const auto& backend : backends) {
    for (u32 n : ns) {
      for (const KernelVariant& v : parse_variants(a.variants, a.cf_list, n)) {
        std::vector<const SweepCell*> group;
        for (const auto& cell : cells)
          if (cell.row.s.backend == backend && cell.row.s.n == n && cell.row.s.variant == v &&
              cell.row.s.error.empty())
            group.push_back(&cell);
        if (group.empty()) continue;

        auto gm = [&](auto getter) {
          std::vector<double> xs;
          for (const auto* cell : group) xs.push_back(getter(*cell));
          return fmt_double(geomean(xs));
        };

        std::vector<std::string> f(kColCount);
        f[kColMatrix] = "geomean(n_matrices=" + std::to_string(group.size()) + ")";
        f[kColBackend] = backend;
        f[kColVariant] = v.name();
        f[kColCf] = std::to_string(v.cf_effective());
        f[kColOp] = a.op;
        f[kColN] = std::to_string(n);
        if (backend == "sim") {
          f[kColGld] = gm([](const SweepCell& c) { return double(c.row.sim->gld_transactions); });
          f[kColGst] = gm([](const SweepCell& c) { return double(c.row.sim->gst_transactions); });
          f[kColReqLoad] =
              gm([](const SweepCell& c) { return double(c.row.sim->requested_load_bytes); });
          f[kColTransfLoad] =
              gm([](const SweepCell& c) { return double(c.row.sim->transferred_load_bytes); });
          f[kColEff] = gm([](const SweepCell& c) { return c.row.sim->gld_efficiency(); });
          f[kColColIndTx] = gm([](const SweepCell& c) {
            return double(c.row.sim->loads(ArrayId::ColInd).transactions);
          });
          f[kColValTx] = gm([](const SweepCell& c) {
            return double(c.row.sim->loads(ArrayId::Val).transactions);
          });
          f[kColBTx] = gm(
              [](const SweepCell& c) { return double(c.row.sim->loads(ArrayId::B).transactions); });
        } else {
          f[kColElapsed] = gm([](const SweepCell& c) { return c.row.native->elapsed_s; });
          f[kColGflops] = gm([](const SweepCell& c) { return c.row.native->gflops; });
        }
        std::string line;
        for (int i = 0; i < kColCount; ++i) {
          if (i) line += ',';
          line += csv_field(f[i]);
        }
        csv << line << "\n";
      }
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSR SpMM laboratory: simulated memory-transaction metrics and native execution"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a uniform random square matrix (binary cache)");
  gen_cmd->add_option("--rows", gen.rows, "number of rows (= cols)")->required();
  gen_cmd->add_option("--nnz", gen.nnz, "number of nonzeros")->required();
  auto* seed_opt = gen_cmd->add_option("--seed", gen.seed, "RNG seed (default: SPMM_SEED env or 1)");
  gen_cmd->add_flag("--self-loops", gen.self_loops, "allow diagonal entries");
  gen_cmd->add_option("-o,--output", gen.output, "output .csr path")->required();

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "run kernels on the SIMT memory-model simulator");
  sim_cmd->add_option("matrix", sim.matrix, "input matrix (.mtx or .csr)")->required();
  sim_cmd->add_option("-N", sim.n_list, "dense column counts, comma separated")->required();
  sim_cmd->add_option("--variant", sim.variants, "naive,crc,crc-cwm,auto (comma separated)");
  sim_cmd->add_option("--cf", sim.cf_list, "coarsening factors for crc-cwm (default 2)");
  sim_cmd->add_option("--op", sim.op, "reduce op: sum or max");
  sim_cmd->add_option("--warp-size", sim.warp_size, "lanes per warp (default 32)");
  sim_cmd->add_option("--warps-per-block", sim.warps_per_block, "warps per block (default 8)");
  sim_cmd->add_flag("--sim-parallel", sim.parallel, "evaluate blocks concurrently");
  sim_cmd->add_option("--trace", sim.trace_path, "write verbose access trace (single run only)");
  sim_cmd->add_option("--csv", sim.csv_path, "also write records as CSV");
  sim_cmd->add_option("-o,--output", sim.out_path, "JSON-lines output (default stdout)");
  sim_cmd->add_option("--b-seed", sim.b_seed, "seed for the dense input matrix");

  VerifyArgs ver;
  auto* ver_cmd = app.add_subcommand("verify", "check all variants on both backends against the oracle");
  ver_cmd->add_option("matrix", ver.matrix, "input matrix (.mtx or .csr)")->required();
  ver_cmd->add_option("-N", ver.n, "dense column count")->required();
  ver_cmd->add_option("--op", ver.ops, "ops to check, comma separated (default sum,max)");
  ver_cmd->add_option("--fault", ver.fault, "fault injection: none or skip-tail");
  ver_cmd->add_option("--warp-size", ver.warp_size, "lanes per warp (default 32)");
  ver_cmd->add_option("--warps-per-block", ver.warps_per_block, "warps per block (default 8)");
  ver_cmd->add_option("--b-seed", ver.b_seed, "seed for the dense input matrix");
  ver_cmd->add_option("--workers", ver.workers, "native worker threads (0 = hardware)");

  BenchArgs ben;
  auto* ben_cmd = app.add_subcommand("bench", "time the native backend");
  ben_cmd->add_option("matrix", ben.matrix, "input matrix (.mtx or .csr)")->required();
  ben_cmd->add_option("-N", ben.n_list, "dense column counts, comma separated")->required();
  ben_cmd->add_option("--variant", ben.variants, "variants, comma separated (default auto)");
  ben_cmd->add_option("--cf", ben.cf_list, "coarsening factors for crc-cwm");
  ben_cmd->add_option("--op", ben.op, "reduce op: sum or max");
  ben_cmd->add_option("--workers", ben.workers, "worker threads (0 = hardware)");
  ben_cmd->add_option("--repeats", ben.repeats, "timing repeats (median reported, default 9)");
  ben_cmd->add_option("--b-seed", ben.b_seed, "seed for the dense input matrix");
  ben_cmd->add_option("-o,--output", ben.out_path, "JSON-lines output (default stdout)");

  SweepArgs sw;
  auto* sw_cmd = app.add_subcommand("sweep", "grid over matrices, variants and N; tidy CSV output");
  sw_cmd->add_option("matrices", sw.matrices, "input matrices (.mtx or .csr)")->required();
  sw_cmd->add_option("-N", sw.n_list, "dense column counts, comma separated")->required();
  sw_cmd->add_option("--variant", sw.variants, "variants, comma separated");
  sw_cmd->add_option("--cf", sw.cf_list, "coarsening factors for crc-cwm");
  sw_cmd->add_option("--backend", sw.backend, "sim, native or both (default sim)");
  sw_cmd->add_option("--op", sw.op, "reduce op: sum or max");
  sw_cmd->add_option("--workers", sw.workers, "native worker threads");
  sw_cmd->add_option("--repeats", sw.repeats, "native timing repeats (default 3)");
  sw_cmd->add_option("--b-seed", sw.b_seed, "seed for the dense input matrix");
  sw_cmd->add_flag("--verify", sw.verify, "compare each run against the dense reference");
  sw_cmd->add_option("--csv", sw.csv_path, "CSV output (default stdout)");
  sw_cmd->add_option("--jsonl", sw.jsonl_path, "also write records as JSON-lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    gen.seed_given = seed_opt->count() > 0;
    if (gen_cmd->parsed()) return cmd_gen(gen);
    if (sim_cmd->parsed()) return cmd_simulate(sim);
    if (ver_cmd->parsed()) return cmd_verify(ver);
    if (ben_cmd->parsed()) return cmd_bench(ben);
    if (sw_cmd->parsed()) return cmd_sweep(sw);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}
