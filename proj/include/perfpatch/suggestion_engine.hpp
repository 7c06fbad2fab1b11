#pragma once

// Backend contract and ranking of sampled hypotheses.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "perfpatch/error.hpp"
#include "perfpatch/example_builder.hpp"
#include "perfpatch/util/jsonl.hpp"

namespace perfpatch {

struct Hypothesis {
    std::string text;
    double avg_loglik = 0.0;
};

/// A source of candidate patches. `sample` returns at most `n` hypotheses
/// in output format (imports, attributes, methods) and must be safe to call
/// from several threads at once.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    virtual std::vector<Hypothesis> sample(const std::string& input_text, std::size_t n,
                                           std::optional<std::uint64_t> seed) = 0;
    /// Whether calls go over the network and count against the in-flight cap.
    virtual bool remote() const { return false; }
};

struct Suggestion {
    std::string suggestion_id;
    std::string example_id;
    std::string patch_text;
    double avg_token_loglik = 0.0;
    std::string backend_id;
    std::size_t rank = 0;
};

inline void to_json(util::json& j, const Suggestion& s) {
    j = util::json{{"suggestion_id", s.suggestion_id}, {"example_id", s.example_id},
                   {"patch_text", s.patch_text},       {"avg_token_loglik", s.avg_token_loglik},
                   {"backend_id", s.backend_id},       {"rank", s.rank}};
}
inline void from_json(const util::json& j, Suggestion& s) {
    s.suggestion_id = j.value("suggestion_id", std::string());
    s.example_id = j.value("example_id", std::string());
    j.at("patch_text").get_to(s.patch_text);
    s.avg_token_loglik = j.value("avg_token_loglik", 0.0);
    s.backend_id = j.value("backend_id", std::string());
    s.rank = j.value("rank", std::size_t{0});
}

/// Merge identical hypotheses keeping the best log-likelihood, order by
/// log-likelihood descending then patch text ascending, keep `top_k`.
inline std::vector<Suggestion> rank_hypotheses(std::vector<Hypothesis> hyps, std::size_t top_k,
                                               const std::string& backend_id) {
    std::map<std::string, double> best;
    for (auto& h : hyps) {
        auto [it, inserted] = best.emplace(std::move(h.text), h.avg_loglik);
        if (!inserted) it->second = std::max(it->second, h.avg_loglik);
    }
    std::vector<std::pair<std::string, double>> merged(best.begin(), best.end());
    std::stable_sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (merged.size() > top_k) merged.resize(top_k);
    std::vector<Suggestion> out;
    out.reserve(merged.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
        Suggestion s;
        s.patch_text = std::move(merged[i].first);
        s.avg_token_loglik = merged[i].second;
        s.backend_id = backend_id;
        s.rank = i + 1;
        out.push_back(std::move(s));
    }
    return out;
}

/// Any failure inside the backend surfaces as BackendFailure naming it.
inline std::vector<Suggestion> sample_and_rank(const std::string& input_text, std::size_t n_samples,
                                               std::size_t top_k, Backend& backend,
                                               std::optional<std::uint64_t> seed = std::nullopt) {
    if (top_k < 1 || n_samples < top_k) throw ConfigError("sampling needs n_samples >= top_k >= 1");
    std::vector<Hypothesis> hyps;
    try {
        hyps = backend.sample(input_text, n_samples, seed);
    } catch (const BackendFailure&) {
        throw;
    } catch (const Error& e) {
        throw BackendFailure("[" + backend.id() + "] " + e.what());
    } catch (const std::exception& e) {
        throw BackendFailure("[" + backend.id() + "] " + e.what());
    }
    if (hyps.size() > n_samples)
        throw BackendFailure("[" + backend.id() + "] returned " + std::to_string(hyps.size()) +
                             " hypotheses for n = " + std::to_string(n_samples));
    return rank_hypotheses(std::move(hyps), top_k, backend.id());
}

struct SuggestOptions {
    std::size_t n_samples = 2000;
    std::size_t top_k = 100;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 4;
    std::size_t max_in_flight = 8;  // concurrent remote requests
};

struct SuggestFailure {
    std::string example_id;
    std::string error;
};

/// Suggestions for every example, grouped in input order. Examples whose
/// backend call fails are reported in `failures` and yield no suggestions.
inline std::vector<Suggestion> suggest_all(const std::vector<TransformationExample>& examples, Backend& backend,
                                           const SuggestOptions& opt, std::vector<SuggestFailure>* failures = nullptr) {
    std::vector<std::vector<Suggestion>> per(examples.size());
    std::vector<std::optional<std::string>> errors(examples.size());
    std::counting_semaphore<1 << 16> in_flight(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, opt.max_in_flight)));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= examples.size()) return;
            const auto& ex = examples[i];
            try {
                if (backend.remote()) in_flight.acquire();
                struct Release {
                    std::counting_semaphore<1 << 16>* s;
                    ~Release() {
                        if (s) s->release();
                    }
                } rel{backend.remote() ? &in_flight : nullptr};
                auto sugg = sample_and_rank(ex.input_text, opt.n_samples, opt.top_k, backend, opt.seed);
                for (auto& s : sugg) {
                    s.example_id = ex.example_id;
                    s.suggestion_id = ex.example_id + "#" + std::to_string(s.rank);
                }
                per[i] = std::move(sugg);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::size_t workers = std::max<std::size_t>(1, std::min(opt.workers, examples.size()));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    std::vector<Suggestion> out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (errors[i] && failures) failures->push_back({examples[i].example_id, *errors[i]});
        for (auto& s : per[i]) out.push_back(std::move(s));
    }
    return out;
}

}  // namespace perfpatch
