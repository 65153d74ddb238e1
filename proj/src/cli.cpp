// SPDX-License-Identifier: Apache-2.0
#include "mxplus/cli.hpp"

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mxplus/analysis.hpp"
#include "mxplus/error.hpp"
#include "mxplus/linalg.hpp"
#include "mxplus/tensorio.hpp"

namespace mx::cli {
namespace {

Format format_arg(const std::string& name) {
  try {
    return Format::from_name(name);
  } catch (const Error&) {
    throw Error(ErrorCode::usage, "unknown format '" + name + "'");
  }
}

void emit(const nlohmann::json& j, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << j.dump(2) << "\n";
  } else {
    write_json(path, j);
  }
}

struct QuantizeArgs {
  std::string format, in, out, report;
  double tensor_scale = 1.0;
};

int cmd_quantize(const QuantizeArgs& a, std::ostream& out) {
  const Format f = format_arg(a.format);
  const Tensor t = read_tensor(a.in);
  const EncodedTensor et = encode_tensor(t, f, a.tensor_scale);
  write_blocks(a.out, et);
  if (!a.report.empty()) write_json(a.report, to_json(mse_report(t, f)));
  out << "wrote " << et.blocks.size() << " " << f.name() << " blocks (" << block_payload_bytes(et)
      << " payload bytes) to " << a.out << "\n";
  return kExitOk;
}

struct DequantizeArgs {
  std::string in, out;
};

int cmd_dequantize(const DequantizeArgs& a, std::ostream& out) {
  const EncodedTensor et = read_blocks(a.in);
  write_tensor(a.out, decode_tensor(et));
  out << "wrote " << a.out << "\n";
  return kExitOk;
}

struct AnalyzeArgs {
  std::string in, out;
  std::vector<std::string> formats{"mxfp4", "mxfp4+", "mxfp4++"};
  size_t block_size = 32;
  bool topk = false;
  bool per_block = false;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  std::vector<Format> formats;
  for (const auto& name : a.formats) formats.push_back(format_arg(name));
  const Tensor t = read_tensor(a.in);

  nlohmann::json j;
  j["shape"] = t.shape;
  j["reports"] = nlohmann::json::array();
  for (const auto& f : formats) {
    auto r = to_json(mse_report(t, f));
    if (!a.per_block) r.erase("per_block_sse");
    j["reports"].push_back(r);
  }
  j["outliers"] = to_json(outlier_stats(t, a.block_size));
  if (a.topk) {
    j["topk_hybrid"] = nlohmann::json::array();
    for (size_t k = 0; k <= 32; ++k) j["topk_hybrid"].push_back(to_json(topk_hybrid_sse(t, k)));
  }
  emit(j, a.out, out);
  return kExitOk;
}

struct MatmulArgs {
  std::string a, b, out, format_a = "mxfp4+", format_b = "mxfp4";
  std::vector<std::string> paths;
  bool check = false;
};

EncodedTensor load_operand(const std::string& path, const std::string& format) {
  if (sniff_file(path) == FileKind::blocks) return read_blocks(path);
  return encode_tensor(read_tensor(path), format_arg(format));
}

int cmd_matmul(const MatmulArgs& m, std::ostream& out, std::ostream& err) {
  std::vector<MatmulPath> paths;
  for (const auto& p : m.paths.empty() ? std::vector<std::string>{"reference"} : m.paths) {
    paths.push_back(matmul_path_from_name(p));
  }
  format_arg(m.format_a);
  format_arg(m.format_b);
  const EncodedTensor a = load_operand(m.a, m.format_a);
  const EncodedTensor b = load_operand(m.b, m.format_b);

  const Tensor first = matmul(a, b, paths.front());
  nlohmann::json j;
  j["format_a"] = a.format.name();
  j["format_b"] = b.format.name();
  j["shape"] = first.shape;
  j["paths"] = nlohmann::json::array();
  for (auto p : paths) j["paths"].push_back(to_string(p));

  if (m.check) {
    if (std::find(paths.begin(), paths.end(), MatmulPath::reference) == paths.end()) {
      paths.push_back(MatmulPath::reference);
    }
    for (auto p : paths) {
      const Tensor d = p == paths.front() ? first : matmul(a, b, p);
      for (size_t i = 0; i < d.numel(); ++i) {
        if (d.data[i] == first.data[i]) continue;
        const size_t cols = first.cols();
        std::ostringstream msg;
        msg << to_string(p) << " differs from " << to_string(paths.front()) << " at (" << i / cols << ", "
            << i % cols << "): " << d.data[i] << " vs " << first.data[i];
        err << "error: " << to_string(ErrorCode::check_failed) << ": " << msg.str() << "\n";
        return kExitFailure;
      }
    }
    j["check"] = "pass";
  }
  if (!m.out.empty()) write_tensor(m.out, first);
  out << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_gen(const SyntheticSpec& spec, const std::string& path, std::ostream& out) {
  write_tensor(path, synthetic_tensor(spec));
  out << "wrote " << spec.rows << "x" << spec.cols << " tensor to " << path << "\n";
  return kExitOk;
}

struct ReorderArgs {
  std::vector<std::string> stats_from;
  std::string apply, out, perm_out;
  size_t block_size = 32;
  bool upper_first = false;
};

int cmd_reorder(const ReorderArgs& r, std::ostream& out) {
  std::vector<OutlierStats> stats;
  for (const auto& p : r.stats_from) stats.push_back(outlier_stats(read_tensor(p), r.block_size));
  const Permutation perm = reorder_channels(average_channel_counts(stats), r.block_size, r.upper_first);

  nlohmann::json j = to_json(perm);
  if (!r.apply.empty()) {
    const Tensor t = read_tensor(r.apply);
    const Tensor moved = apply_permutation(t, perm);
    j["before"] = to_json(outlier_stats(t, r.block_size));
    j["after"] = to_json(outlier_stats(moved, r.block_size));
    write_tensor(r.out, moved);
  }
  emit(j, r.perm_out, out);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Block floating-point quantization toolkit"};
  app.name("mxtool");
  app.require_subcommand(1);

  std::string formats_help = "Format name:";
  for (auto n : Format::all_names()) formats_help += " " + std::string(n);

  QuantizeArgs q;
  auto* quantize = app.add_subcommand("quantize", "Encode a tensor file into a block file");
  quantize->add_option("--format", q.format, formats_help)->required();
  quantize->add_option("--in", q.in, "Input tensor file")->required();
  quantize->add_option("--out", q.out, "Output block file")->required();
  quantize->add_option("--report", q.report, "Write an MSE report as JSON");
  quantize->add_option("--tensor-scale", q.tensor_scale, "Per-tensor pre-scale (NVFP4 formats only)");

  DequantizeArgs dq;
  auto* dequantize = app.add_subcommand("dequantize", "Decode a block file into a tensor file");
  dequantize->add_option("--in", dq.in, "Input block file")->required();
  dequantize->add_option("--out", dq.out, "Output tensor file")->required();

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Quantization error and outlier report");
  analyze->add_option("--in", an.in, "Input tensor file")->required();
  analyze->add_option("--formats", an.formats, "Comma-separated format names")->delimiter(',');
  analyze->add_option("--block-size", an.block_size, "Block size for outlier statistics");
  analyze->add_flag("--topk", an.topk, "Include the top-k hybrid sweep for k = 0..32");
  analyze->add_flag("--per-block", an.per_block, "Include per-block SSE arrays");
  analyze->add_option("--out", an.out, "Write the report here instead of stdout");

  MatmulArgs mm;
  auto* matmul_cmd = app.add_subcommand("matmul", "Emulated matmul D = A * B with B given transposed (N x K)");
  matmul_cmd->add_option("--a", mm.a, "A: tensor or block file, M x K")->required();
  matmul_cmd->add_option("--b", mm.b, "B transposed: tensor or block file, N x K")->required();
  matmul_cmd->add_option("--format-a", mm.format_a, "Format for A when given as a tensor file");
  matmul_cmd->add_option("--format-b", mm.format_b, "Format for B when given as a tensor file");
  matmul_cmd->add_option("--path", mm.paths, "reference, decomposed or bcu (repeatable)");
  matmul_cmd->add_flag("--check", mm.check, "Require bit-exact agreement of all paths with reference");
  matmul_cmd->add_option("--out", mm.out, "Write D as a tensor file");

  SyntheticSpec spec;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a Gaussian tensor with planted outlier channels");
  gen->add_option("--rows", spec.rows)->check(CLI::PositiveNumber);
  gen->add_option("--cols", spec.cols)->check(CLI::PositiveNumber);
  gen->add_option("--outlier-frac", spec.outlier_frac)->check(CLI::Range(0.0, 1.0));
  gen->add_option("--outlier-scale", spec.outlier_scale);
  gen->add_option("--seed", spec.seed);
  gen->add_flag("--adjacent", spec.adjacent, "Place outlier channels next to each other");
  gen->add_option("--out", gen_out, "Output tensor file")->required();

  ReorderArgs ro;
  auto* reorder = app.add_subcommand("reorder", "Channel reordering from outlier statistics");
  reorder->add_option("--stats-from", ro.stats_from, "Calibration tensor files")->required()->delimiter(',');
  reorder->add_option("--apply", ro.apply, "Tensor file to permute");
  reorder->add_option("--out", ro.out, "Permuted tensor file");
  reorder->add_option("--perm-out", ro.perm_out, "Write the permutation JSON here instead of stdout");
  reorder->add_option("--block-size", ro.block_size)->check(CLI::PositiveNumber);
  reorder->add_flag("--upper-first", ro.upper_first, "Place the upper half before the lower half");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!ro.apply.empty() && ro.out.empty()) throw Error(ErrorCode::usage, "--apply needs --out");
    if (*quantize) return cmd_quantize(q, out);
    if (*dequantize) return cmd_dequantize(dq, out);
    if (*analyze) return cmd_analyze(an, out);
    if (*matmul_cmd) return cmd_matmul(mm, out, err);
    if (*gen) return cmd_gen(spec, gen_out, out);
    if (*reorder) return cmd_reorder(ro, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::usage ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace mx::cli
