#include "hallu/features.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "hallu/datasets.hpp"
#include "hallu/error.hpp"

namespace hallu {
namespace {

using ordered_json = nlohmann::ordered_json;
using CacheKey = std::tuple<std::string, std::string, std::string>;

CacheKey key_of(const FeatureRecord& r) { return {r.sample_id, r.evaluator, r.variant.str()}; }

}  // namespace

std::string Variant::str() const {
  return std::string(include_condition ? "with_condition" : "no_condition") + "+" +
         (include_knowledge ? "with_knowledge" : "no_knowledge");
}

Variant Variant::parse(std::string_view text) {
  const auto plus = text.find('+');
  const std::string_view cond = text.substr(0, plus);
  Variant v;
  if (cond == "with_condition") {
    v.include_condition = true;
  } else if (cond == "no_condition") {
    v.include_condition = false;
  } else {
    throw Error(ErrorCode::ConfigError, "bad variant '" + std::string(text) + "'");
  }
  if (plus == std::string_view::npos) return v;
  const std::string_view know = text.substr(plus + 1);
  if (know == "with_knowledge") {
    v.include_knowledge = true;
  } else if (know != "no_knowledge") {
    throw Error(ErrorCode::ConfigError, "bad variant '" + std::string(text) + "'");
  }
  return v;
}

FeatureVector compute_features(std::span<const TokenRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptySequence, "no token records");
  FeatureVector f;
  f.mtp = records.front().p_token;
  f.mps = records.front().p_max - records.front().p_min;
  f.mpd = records.front().p_max - records.front().p_token;
  double sum = 0.0;
  for (const auto& r : records) {
    if (!(r.p_min <= r.p_token && r.p_token <= r.p_max)) {
      throw Error(ErrorCode::InvalidRecord,
                  "position " + std::to_string(r.position) + " is not p_min <= p_token <= p_max");
    }
    f.mtp = std::min(f.mtp, r.p_token);
    f.mpd = std::max(f.mpd, r.p_max - r.p_token);
    f.mps = std::min(f.mps, r.p_max - r.p_min);
    sum += r.p_token;
  }
  f.avgtp = sum / static_cast<double>(records.size());
  return f;
}

FeatureRecord extract(const LabeledPair& sample, const ProbabilityProvider& provider,
                      const Variant& variant) {
  ScoringRequest request{sample.condition_text, sample.knowledge, sample.generated_text,
                         variant.include_condition, variant.include_knowledge};
  try {
    const auto records = score(request, provider);
    FeatureRecord out;
    out.sample_id = sample.id;
    out.features = compute_features(records);
    out.label = sample.label;
    out.evaluator = provider.info().name;
    out.variant = variant;
    out.exact_min = std::all_of(records.begin(), records.end(),
                                [](const TokenRecord& r) { return r.exact_min; });
    return out;
  } catch (const Error& e) {
    const ErrorCode code =
        e.code() == ErrorCode::EmptyGeneration ? ErrorCode::EmptySequence : e.code();
    throw Error(code, "sample " + sample.id + ": " + e.detail());
  }
}

std::string to_cache_line(const FeatureRecord& r) {
  ordered_json doc;
  doc["id"] = r.sample_id;
  doc["evaluator"] = r.evaluator;
  doc["variant"] = r.variant.str();
  doc["mtp"] = r.features.mtp;
  doc["avgtp"] = r.features.avgtp;
  doc["mpd"] = r.features.mpd;
  doc["mps"] = r.features.mps;
  doc["label"] = r.label;
  doc["exact_min"] = r.exact_min;
  return doc.dump();
}

FeatureRecord from_cache_line(std::string_view line) {
  const auto doc = ordered_json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::MalformedRecord, "cache line is not a JSON object");
  }
  try {
    FeatureRecord r;
    r.sample_id = doc.at("id").get<std::string>();
    r.evaluator = doc.at("evaluator").get<std::string>();
    r.variant = Variant::parse(doc.at("variant").get<std::string>());
    r.features.mtp = doc.at("mtp").get<double>();
    r.features.avgtp = doc.at("avgtp").get<double>();
    r.features.mpd = doc.at("mpd").get<double>();
    r.features.mps = doc.at("mps").get<double>();
    r.label = doc.at("label").get<int>();
    r.exact_min = doc.at("exact_min").get<bool>();
    if (r.label != 0 && r.label != 1) {
      throw Error(ErrorCode::MalformedRecord, "label must be 0 or 1");
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::MalformedRecord, e.detail());
  }
}

std::vector<FeatureRecord> read_cache(const std::filesystem::path& path) {
  std::vector<FeatureRecord> rows;
  if (!std::filesystem::exists(path)) return rows;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::set<CacheKey> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(from_cache_line(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRecord,
                  path.filename().string() + ":" + std::to_string(line_no) + ": " + e.detail());
    }
    if (!seen.insert(key_of(rows.back())).second) {
      throw Error(ErrorCode::MalformedRecord,
                  path.filename().string() + ":" + std::to_string(line_no) +
                      ": duplicate key for " + rows.back().sample_id);
    }
  }
  return rows;
}

void append_cache(const std::filesystem::path& path, std::span<const FeatureRecord> records) {
  if (records.empty()) return;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& r : records) out << to_cache_line(r) << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

BatchResult extract_batch(std::span<const LabeledPair> samples,
                          const ProbabilityProvider& provider, const Variant& variant,
                          const std::filesystem::path& cache_path, std::size_t threads) {
  const auto existing = read_cache(cache_path);
  std::set<CacheKey> cached;
  for (const auto& r : existing) cached.insert(key_of(r));

  const std::string evaluator = provider.info().name;
  const std::string variant_name = variant.str();

  BatchResult result;
  std::vector<const LabeledPair*> todo;
  std::set<std::string> queued;
  for (const auto& s : samples) {
    if (cached.count({s.id, evaluator, variant_name})) {
      ++result.skipped;
    } else if (queued.insert(s.id).second) {
      todo.push_back(&s);
    }
  }

  std::vector<std::optional<FeatureRecord>> done(todo.size());
  std::vector<std::optional<ExtractFailure>> failed(todo.size());
  std::atomic<std::size_t> next{0};
  std::mutex serial;

  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      try {
        std::unique_lock<std::mutex> lock(serial, std::defer_lock);
        if (!provider.concurrent()) lock.lock();
        done[i] = extract(*todo[i], provider, variant);
      } catch (const Error& e) {
        failed[i] = ExtractFailure{todo[i]->id, e.what(), exit_code_for(e.code())};
      } catch (const std::exception& e) {
        failed[i] = ExtractFailure{todo[i]->id, e.what(), 1};
      }
    }
  };

  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(todo.size(), 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  std::vector<FeatureRecord> fresh;
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (done[i]) fresh.push_back(std::move(*done[i]));
    if (failed[i]) result.failures.push_back(std::move(*failed[i]));
  }
  std::sort(fresh.begin(), fresh.end(),
            [](const FeatureRecord& a, const FeatureRecord& b) { return a.sample_id < b.sample_id; });
  append_cache(cache_path, fresh);
  result.added = fresh.size();

  std::size_t rows = 0;
  std::size_t exact = 0;
  auto tally = [&](const FeatureRecord& r) {
    if (r.evaluator == evaluator && r.variant == variant) {
      ++rows;
      exact += r.exact_min ? 1 : 0;
    }
  };
  for (const auto& r : existing) tally(r);
  for (const auto& r : fresh) tally(r);
  result.exact_min_fraction = rows ? static_cast<double>(exact) / static_cast<double>(rows) : 1.0;
  return result;
}

}  // namespace hallu
