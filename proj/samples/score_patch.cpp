// Scores a candidate method against a reference with CodeBLEU and the
// verbatim/abstracted match predicates.
//   score_patch <candidate.cs> <reference.cs>

#include <cstdio>

#include "perfpatch.hpp"

int main(int argc, char** argv) {
    if (argc != 3) {
        std::fprintf(stderr, "usage: %s <candidate> <reference>\n", argv[0]);
        return 2;
    }
    try {
        auto cand = perfpatch::util::read_file(argv[1]);
        auto ref = perfpatch::util::read_file(argv[2]);
        auto p = perfpatch::codebleu_parts(cand, ref);
        std::printf("bleu %.4f  weighted %.4f  syntax %.4f  dataflow %.4f  codebleu %.4f\n", p.bleu, p.weighted_bleu,
                    p.syntax, p.dataflow, p.score);
        std::printf("verbatim %s  abstracted %s\n", perfpatch::verbatim_match({cand}, ref) ? "yes" : "no",
                    perfpatch::abstracted_match({cand}, ref) ? "yes" : "no");
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
