#pragma once

// Dataset loading (LIBSVM text format), bias augmentation and K-fold
// cross-validation splitting.

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <set>
#include <sstream>

#include "svctune/common.hpp"

namespace svctune {

struct Dataset {
  Mat x;                               // one row per point
  IVec y;                              // labels in {-1, +1}
  int n_features = 0;
  bool bias_augmented = false;
  std::vector<bool> feature_observed;  // false = index never present in the file
  // Original label values, mapped_to_plus_one = the larger of the two.
  double label_plus = +1.0, label_minus = -1.0;

  Eigen::Index size() const { return x.rows(); }
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& name, int line,
                                    const std::string& what) {
  throw std::runtime_error(name + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

// Parses LIBSVM text: one record per line, "label idx:val idx:val ...".
// Feature indices are 1-based and must be strictly increasing within a
// record; absent indices are dense zeros. Exactly two distinct label values
// are required; the larger maps to +1. Lines that are empty or start with
// '#' are skipped.
inline Dataset parse_libsvm(std::istream& in, const std::string& name = "<stream>") {
  struct Entry { int idx; double val; };
  std::vector<std::vector<Entry>> rows;
  std::vector<double> raw_labels;
  std::set<double> label_values;
  int n_features = 0;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;

    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    bool ok = false;
    double label = parse_num(tok, &ok);
    if (!ok) detail::parse_fail(name, line_no, "bad label '" + tok + "'");
    raw_labels.push_back(label);
    label_values.insert(label);
    if (label_values.size() > 2)
      detail::parse_fail(name, line_no, "more than two distinct labels");

    std::vector<Entry> row;
    int prev_idx = 0;
    while (ls >> tok) {
      size_t colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        detail::parse_fail(name, line_no, "expected idx:value, got '" + tok + "'");
      bool iok = false, vok = false;
      double idx_d = parse_num(std::string_view(tok).substr(0, colon), &iok);
      double val = parse_num(std::string_view(tok).substr(colon + 1), &vok);
      int idx = static_cast<int>(idx_d);
      if (!iok || !vok || idx_d != idx)
        detail::parse_fail(name, line_no, "malformed feature '" + tok + "'");
      if (idx < 1)
        detail::parse_fail(name, line_no, "feature index must be >= 1, got " +
                                              std::to_string(idx));
      if (idx <= prev_idx)
        detail::parse_fail(name, line_no,
                           "feature indices must be strictly increasing (" +
                               std::to_string(prev_idx) + " then " +
                               std::to_string(idx) + ")");
      prev_idx = idx;
      n_features = std::max(n_features, idx);
      row.push_back({idx, val});
    }
    rows.push_back(std::move(row));
  }

  if (rows.empty()) throw std::runtime_error(name + ": no records");
  if (label_values.size() < 2)
    throw std::runtime_error(name + ": need two classes, found one label value");

  Dataset ds;
  ds.n_features = n_features;
  ds.label_plus = *label_values.rbegin();
  ds.label_minus = *label_values.begin();
  ds.x = Mat::Zero(static_cast<Eigen::Index>(rows.size()), n_features);
  ds.y.resize(static_cast<Eigen::Index>(rows.size()));
  ds.feature_observed.assign(static_cast<size_t>(n_features), false);
  for (size_t i = 0; i < rows.size(); ++i) {
    ds.y[static_cast<Eigen::Index>(i)] = raw_labels[i] == ds.label_plus ? 1 : -1;
    for (const auto& e : rows[i]) {
      ds.x(static_cast<Eigen::Index>(i), e.idx - 1) = e.val;
      ds.feature_observed[static_cast<size_t>(e.idx - 1)] = true;
    }
  }
  return ds;
}

inline Dataset parse_libsvm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file: " + path);
  return parse_libsvm(in, path);
}

// Appends a constant-1 column so a bias term rides along with the weights.
// Refuses to run twice; callers with pre-augmented data set the flag at load
// time instead.
inline Dataset augment_bias(const Dataset& ds) {
  if (ds.bias_augmented)
    throw std::logic_error("dataset is already bias-augmented");
  Dataset out = ds;
  out.n_features = ds.n_features + 1;
  out.x = Mat::Ones(ds.x.rows(), ds.n_features + 1);
  out.x.leftCols(ds.n_features) = ds.x;
  out.feature_observed.push_back(true);
  out.bias_augmented = true;
  return out;
}

struct CvSplit {
  int K = 0;
  int m1 = 0, m2 = 0;                       // per-fold validation / training sizes
  std::vector<std::vector<int>> folds;      // original row ids, disjoint
  std::vector<int> test_indices;            // rows outside the CV subset

  std::vector<int> training_indices(int t) const {
    std::vector<int> tr;
    tr.reserve(static_cast<size_t>(m2));
    for (int s = 0; s < K; ++s)
      if (s != t) tr.insert(tr.end(), folds[static_cast<size_t>(s)].begin(),
                            folds[static_cast<size_t>(s)].end());
    return tr;
  }
};

// Splits `ds` into a CV subset of cv_size points (K folds of equal size) and
// a hold-out test set. Stratified by default: the fold class ratios track the
// dataset's. Deterministic for a fixed seed.
inline CvSplit kfold_split(const Dataset& ds, int K, int cv_size, uint64_t seed,
                           bool stratify = true) {
  const int l = static_cast<int>(ds.size());
  if (K < 2) throw std::invalid_argument("kfold_split: K must be >= 2");
  if (cv_size <= 0 || cv_size > l)
    throw std::invalid_argument("kfold_split: cv_size must be in [1, " +
                                std::to_string(l) + "]");
  if (cv_size % K != 0)
    throw std::invalid_argument("kfold_split: cv_size " + std::to_string(cv_size) +
                                " not divisible by K=" + std::to_string(K));

  Rng rng(seed);
  std::vector<int> order;  // stratified dealing order over the CV subset
  std::vector<int> rest;

  if (stratify) {
    std::vector<int> pos, neg;
    for (int i = 0; i < l; ++i) (ds.y[i] > 0 ? pos : neg).push_back(i);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);

    int want_pos = static_cast<int>(
        std::llround(static_cast<double>(cv_size) * static_cast<double>(pos.size()) / l));
    want_pos = std::clamp(want_pos, std::max(0, cv_size - static_cast<int>(neg.size())),
                          std::min(cv_size, static_cast<int>(pos.size())));
    int want_neg = cv_size - want_pos;

    // Interleave the two classes evenly so round-robin fold dealing keeps
    // each fold's class counts within one of proportional.
    size_t ip = 0, in = 0;
    double acc_pos = 0.0;
    const double rate = cv_size > 0 ? static_cast<double>(want_pos) / cv_size : 0.0;
    for (int k = 0; k < cv_size; ++k) {
      acc_pos += rate;
      bool take_pos = ip < static_cast<size_t>(want_pos) &&
                      (acc_pos >= static_cast<double>(ip + 1) ||
                       in >= static_cast<size_t>(want_neg));
      order.push_back(take_pos ? pos[ip++] : neg[in++]);
    }
    for (size_t k = ip; k < pos.size(); ++k) rest.push_back(pos[k]);
    for (size_t k = in; k < neg.size(); ++k) rest.push_back(neg[k]);
  } else {
    std::vector<int> all(static_cast<size_t>(l));
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    order.assign(all.begin(), all.begin() + cv_size);
    rest.assign(all.begin() + cv_size, all.end());
  }

  CvSplit sp;
  sp.K = K;
  sp.m1 = cv_size / K;
  sp.m2 = cv_size - sp.m1;
  sp.folds.assign(static_cast<size_t>(K), {});
  // Contiguous blocks of the evenly interleaved order keep per-fold class
  // counts within one of proportional.
  for (int k = 0; k < cv_size; ++k)
    sp.folds[static_cast<size_t>(k / sp.m1)].push_back(order[static_cast<size_t>(k)]);
  std::sort(rest.begin(), rest.end());
  sp.test_indices = std::move(rest);
  return sp;
}

}  // namespace svctune
