// Compares two benchmark summaries and prints one line per benchmark.
//   judge_runs <baseline> <candidate> [alpha]

#include <cstdio>
#include <cstdlib>

#include "perfpatch.hpp"

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: %s <baseline> <candidate> [alpha]\n", argv[0]);
        return 2;
    }
    try {
        double alpha = argc > 3 ? std::atof(argv[3]) : 0.05;
        auto r = perfpatch::judge(perfpatch::load_summary(argv[1]), perfpatch::load_summary(argv[2]), alpha);
        for (const auto& v : r.benchmarks)
            std::printf("%-28s p=%.4f  time %+6.1f%%  memory %+6.1f%%  %s\n", v.benchmark_name.c_str(), v.p_value,
                        v.duration_change_pct, v.memory_change_pct, v.improved() ? "improved" : "-");
        for (const auto& w : r.warnings) std::printf("warning: %s\n", w.c_str());
        std::printf("overall: %s\n", r.overall_improved ? "improved" : "not improved");
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
