// SPDX-License-Identifier: Apache-2.0
#include "chexpo/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "chexpo/error.hpp"
#include "chexpo/numeric.hpp"

namespace chexpo {

namespace {

// Products of floats are exact in double; pairwise summation bounds the
// rounding error by O(log n) and the result depends only on the length.
double pairwise_dot(const float* a, const float* b, std::size_t n) {
  if (n <= 32) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      s0 += double(a[i]) * double(b[i]);
      s1 += double(a[i + 1]) * double(b[i + 1]);
      s2 += double(a[i + 2]) * double(b[i + 2]);
      s3 += double(a[i + 3]) * double(b[i + 3]);
    }
    for (; i < n; ++i) s0 += double(a[i]) * double(b[i]);
    return (s0 + s1) + (s2 + s3);
  }
  const std::size_t half = n / 2;
  return pairwise_dot(a, b, half) + pairwise_dot(a + half, b + half, n - half);
}

}  // namespace

double cosine_normed(std::span<const float> a, double norm_a, std::span<const float> b,
                     double norm_b) {
  const double dot = pairwise_dot(a.data(), b.data(), a.size());
  return std::clamp(dot / (norm_a * norm_b), -1.0, 1.0);
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw_data("dim-mismatch", std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) throw_data("zero-vector");
  return cosine_normed(a, na, b, nb);
}

double combined_similarity(const EmbeddingTriple& a, const EmbeddingTriple& b, ModalityMask mask) {
  double s = 0.0;
  if (mask.question) s += cosine(a.question, b.question);
  if (mask.rationale) s += cosine(a.rationale, b.rationale);
  if (mask.image) s += cosine(a.image, b.image);
  return s;
}

TripleIndex::TripleIndex(const EmbeddingSet& question, const EmbeddingSet& rationale,
                         const EmbeddingSet& image)
    : question_(&question), rationale_(&rationale), image_(&image) {}

TripleIndex::Rows TripleIndex::rows(std::string_view id) const {
  const auto q = question_->find(id);
  const auto t = rationale_->find(id);
  const auto v = image_->find(id);
  if (!q || !t || !v) throw_data("missing-embedding", std::string(id));
  return {*q, *t, *v};
}

EmbeddingTriple TripleIndex::triple(std::string_view id) const {
  const Rows r = rows(id);
  return {question_->row(r.question), rationale_->row(r.rationale), image_->row(r.image)};
}

double TripleIndex::similarity(const Rows& a, const Rows& b, ModalityMask mask) const {
  double s = 0.0;
  auto add = [&](const EmbeddingSet& set, std::size_t i, std::size_t j) {
    s += cosine_normed(set.row(i), set.norm(i), set.row(j), set.norm(j));
  };
  if (mask.question) add(*question_, a.question, b.question);
  if (mask.rationale) add(*rationale_, a.rationale, b.rationale);
  if (mask.image) add(*image_, a.image, b.image);
  return s;
}

namespace {

struct Candidate {
  double score;
  std::size_t gallery;  // position in rest_ids
};

/// Bounded Top-K keeper; the heap front is the weakest kept candidate.
class TopKHeap {
 public:
  TopKHeap(std::size_t k, const std::vector<std::string>* ids) : k_(k), ids_(ids) {
    items_.reserve(k);
  }

  /// True when a ranks strictly ahead of b.
  bool better(const Candidate& a, const Candidate& b) const {
    if (a.score != b.score) return a.score > b.score;
    return (*ids_)[a.gallery] < (*ids_)[b.gallery];
  }

  void offer(Candidate c) {
    auto weaker_on_top = [this](const Candidate& a, const Candidate& b) { return better(a, b); };
    if (items_.size() < k_) {
      items_.push_back(c);
      std::push_heap(items_.begin(), items_.end(), weaker_on_top);
    } else if (better(c, items_.front())) {
      std::pop_heap(items_.begin(), items_.end(), weaker_on_top);
      items_.back() = c;
      std::push_heap(items_.begin(), items_.end(), weaker_on_top);
    }
  }

  std::vector<Candidate> sorted() const {
    auto out = items_;
    std::sort(out.begin(), out.end(), [this](const Candidate& a, const Candidate& b) {
      return better(a, b);
    });
    return out;
  }

 private:
  std::size_t k_;
  const std::vector<std::string>* ids_;
  std::vector<Candidate> items_;
};

}  // namespace

std::vector<NeighborSet> topk_neighbors(const TripleIndex& index,
                                        const std::vector<std::string>& hard_ids,
                                        const std::vector<std::string>& rest_ids, std::size_t k,
                                        const TopKOptions& options) {
  if (k < 1) throw_data("invalid-k", "K must be at least 1");
  if (rest_ids.empty()) throw_data("empty-gallery");
  {
    const std::unordered_set<std::string> rest(rest_ids.begin(), rest_ids.end());
    for (const auto& id : hard_ids) {
      if (rest.count(id)) throw_data("overlap", id + " is both a hard query and a gallery item");
    }
  }

  std::vector<TripleIndex::Rows> query_rows, gallery_rows;
  query_rows.reserve(hard_ids.size());
  gallery_rows.reserve(rest_ids.size());
  for (const auto& id : hard_ids) query_rows.push_back(index.rows(id));
  for (const auto& id : rest_ids) gallery_rows.push_back(index.rows(id));

  std::size_t block_rows = rest_ids.size();
  if (options.block_count > 0) {
    block_rows = (rest_ids.size() + options.block_count - 1) / options.block_count;
  } else if (!hard_ids.empty()) {
    block_rows = std::max<std::size_t>(1, options.cell_budget / hard_ids.size());
  }
  block_rows = std::max<std::size_t>(1, block_rows);

  std::vector<TopKHeap> heaps;
  heaps.reserve(hard_ids.size());
  for (std::size_t q = 0; q < hard_ids.size(); ++q) heaps.emplace_back(k, &rest_ids);

  const std::size_t workers =
      std::max<std::size_t>(1, std::min(options.workers, hard_ids.size()));

  for (std::size_t begin = 0; begin < rest_ids.size(); begin += block_rows) {
    const std::size_t end = std::min(rest_ids.size(), begin + block_rows);
    auto scan = [&](std::size_t q_begin, std::size_t q_end) {
      for (std::size_t q = q_begin; q < q_end; ++q) {
        for (std::size_t g = begin; g < end; ++g) {
          if (rest_ids[g] == hard_ids[q]) continue;
          heaps[q].offer({index.similarity(query_rows[q], gallery_rows[g], options.mask), g});
        }
      }
    };
    if (workers == 1) {
      scan(0, hard_ids.size());
    } else {
      std::vector<std::jthread> pool;
      const std::size_t chunk = (hard_ids.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(hard_ids.size(), lo + chunk);
        if (lo < hi) pool.emplace_back(scan, lo, hi);
      }
    }
  }

  std::vector<NeighborSet> out;
  out.reserve(hard_ids.size());
  for (std::size_t q = 0; q < hard_ids.size(); ++q) {
    NeighborSet set{hard_ids[q], {}};
    for (const auto& c : heaps[q].sorted()) set.neighbors.push_back({rest_ids[c.gallery], c.score});
    out.push_back(std::move(set));
  }
  return out;
}

TopMatch top1_by_text(std::span<const float> query, const EmbeddingSet& gallery,
                      std::span<const std::size_t> candidate_rows, std::string_view exclude_id) {
  if (!gallery.empty() && query.size() != gallery.dim()) {
    throw_data("dim-mismatch", "query dim " + std::to_string(query.size()) + " vs gallery dim " +
                                   std::to_string(gallery.dim()));
  }
  const double qn = l2_norm(query);
  if (qn == 0.0) throw_data("zero-vector", "query embedding");

  std::optional<TopMatch> best;
  for (std::size_t row : candidate_rows) {
    const std::string& id = gallery.id(row);
    if (!exclude_id.empty() && id == exclude_id) continue;
    const double s = cosine_normed(query, qn, gallery.row(row), gallery.norm(row));
    if (!best || s > best->score || (s == best->score && id < best->id)) {
      best = TopMatch{id, row, s};
    }
  }
  if (!best) throw_data("empty-after-exclusion");
  return *best;
}

TopMatch top1_by_text(std::span<const float> query, const EmbeddingSet& gallery,
                      const std::unordered_set<std::string>& exclude) {
  std::vector<std::size_t> rows;
  rows.reserve(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    if (!exclude.count(gallery.id(i))) rows.push_back(i);
  }
  return top1_by_text(query, gallery, rows);
}

void write_neighbors(const std::vector<NeighborSet>& sets, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_data("io-error", "cannot open " + path.string());
  for (const auto& s : sets) {
    nlohmann::ordered_json j;
    j["query_id"] = s.query_id;
    j["neighbors"] = nlohmann::ordered_json::array();
    for (const auto& n : s.neighbors) j["neighbors"].push_back({n.id, n.score});
    out << j.dump() << '\n';
  }
  if (!out) throw_data("io-error", "write failed on " + path.string());
}

std::vector<NeighborSet> read_neighbors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("io-error", "cannot open " + path.string());
  std::vector<NeighborSet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      NeighborSet s{j.at("query_id").get<std::string>(), {}};
      for (const auto& n : j.at("neighbors")) {
        s.neighbors.push_back({n.at(0).get<std::string>(), n.at(1).get<double>()});
      }
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw_data("malformed-json", e.what(), line_no);
    }
  }
  return out;
}

}  // namespace chexpo
