#pragma once

// Umbrella header.

#include "perfpatch/error.hpp"
#include "perfpatch/util/text.hpp"
#include "perfpatch/util/jsonl.hpp"
#include "perfpatch/util/kv_config.hpp"
#include "perfpatch/util/process.hpp"
#include "perfpatch/csharp/lexer.hpp"
#include "perfpatch/csharp/syntax.hpp"
#include "perfpatch/csharp/parser.hpp"
#include "perfpatch/code_model.hpp"
#include "perfpatch/corpus_miner.hpp"
#include "perfpatch/example_builder.hpp"
#include "perfpatch/suggestion_engine.hpp"
#include "perfpatch/rule_backend.hpp"
#include "perfpatch/remote_backend.hpp"
#include "perfpatch/eval_metrics.hpp"
#include "perfpatch/patch_validator.hpp"
#include "perfpatch/bench_stats.hpp"
#include "perfpatch/report.hpp"
#include "perfpatch/pipeline.hpp"
