#include "modefuse/cli.hpp"

#include <algorithm>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "modefuse/digest.hpp"
#include "modefuse/ensemble.hpp"
#include "modefuse/evalkit.hpp"
#include "modefuse/formats.hpp"
#include "modefuse/pipeline.hpp"

namespace modefuse {

using nlohmann::json;

namespace {

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw IoError("short write on " + path.string());
}

struct RunArgs {
    std::string config;
    std::vector<std::string> modes;
    std::string questions;
    std::string labels;
    std::string out_dir;
    int workers = 8;
    bool offline = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

struct EnsembleArgs {
    std::vector<std::string> predictions;
    std::string questions;
    std::string labels;
    std::string activation = "auto";
    std::string out_dir;
    int max_k = 7;
};

struct EvalArgs {
    std::vector<std::string> predictions;
    std::string questions;
    std::string labels;
    std::string out_file;
};

struct ReportArgs {
    std::vector<std::string> predictions;
    std::string labels;
    std::string out_dir;
    bool sweep = false;
};

QuestionSet load_question_inputs(const std::string& questions, const std::string& labels) {
    if (!questions.empty()) {
        QuestionSet qs = load_questions(questions);
        if (!labels.empty()) qs = apply_labels(qs, load_labels(labels));
        return qs;
    }
    if (!labels.empty()) return questions_from_labels(load_labels(labels));
    throw ConfigError("provide --questions and/or --labels");
}

int cmd_run(const RunArgs& a, std::ostream& out) {
    RunConfig cfg = RunConfig::from_file(a.config);
    if (a.seed_set) {
        for (auto& b : cfg.backends) {
            if (b.kind == BackendKind::mock) b.seed = a.seed;
        }
    }

    std::vector<std::string> selected = a.modes;
    if (selected.empty()) {
        for (const auto& m : cfg.modes) selected.push_back(m.mode_id);
    } else {
        for (const auto& id : selected) (void)cfg.mode(id);  // unknown ids error here
    }

    QuestionSet qs = load_questions(a.questions);
    if (!a.labels.empty()) qs = apply_labels(qs, load_labels(a.labels));

    BackendRegistry registry(cfg.backends, a.offline);
    PromptCatalog catalog = cfg.templates_dir.empty()
                                ? PromptCatalog::builtin()
                                : PromptCatalog::from_dir(cfg.templates_dir);

    std::optional<ResponseCache> cache;
    if (!cfg.cache_dir.empty()) cache.emplace(cfg.cache_dir);

    const std::filesystem::path out_dir(a.out_dir);
    const std::string started_at = utc_now();

    // Modes run concurrently; each run_mode bounds its own worker pool and
    // the backends bound their own in-flight windows.
    std::vector<ModeRunResult> results(selected.size());
    std::vector<std::exception_ptr> failures(selected.size());
    std::vector<std::thread> threads;
    threads.reserve(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) {
        threads.emplace_back([&, i] {
            try {
                const ModeConfig& mode = cfg.mode(selected[i]);
                RunOptions opts;
                opts.workers = a.workers;
                opts.cache = cache ? &*cache : nullptr;
                opts.catalog = &catalog;
                opts.checkpoint = out_dir / "checkpoints" / (mode.mode_id + ".jsonl");
                results[i] = run_mode(mode, qs, registry, opts);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();

    json manifest;
    manifest["started_at"] = started_at;
    manifest["finished_at"] = utc_now();
    manifest["questions"] = a.questions;
    manifest["questions_digest"] = question_set_digest(qs);
    manifest["workers"] = a.workers;
    manifest["modes"] = json::array();

    for (std::size_t i = 0; i < selected.size(); ++i) {
        if (failures[i]) continue;
        const ModeRunResult& r = results[i];
        const ModeConfig& mode = cfg.mode(selected[i]);
        save_predictions(r.predictions, out_dir / "predictions" / (mode.mode_id + ".json"));
        save_records(r.records, out_dir / "records" / (mode.mode_id + ".jsonl"), true);

        json m;
        m["mode_id"] = mode.mode_id;
        m["fingerprint"] = sha256_hex(mode.fingerprint_material());
        m["backend_id"] = mode.backend_id;
        m["answered"] = r.predictions.answers.size();
        m["abstained"] = r.abstentions;
        m["backend_calls"] = r.backend_calls;
        m["cache_hits"] = r.cache_hits;
        m["resumed"] = r.resumed;
        manifest["modes"].push_back(std::move(m));

        out << "mode " << mode.mode_id << ": answered " << r.predictions.answers.size() << "/"
            << qs.size() << ", abstained " << r.abstentions << ", backend calls "
            << r.backend_calls << ", cache hits " << r.cache_hits << ", resumed " << r.resumed
            << "\n";
    }
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");

    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);  // checkpoints keep finished questions
    }
    out << "wrote " << (out_dir / "manifest.json").string() << "\n";
    return static_cast<int>(ExitCode::ok);
}

std::vector<std::string> parse_activation(const std::string& activation,
                                          const std::vector<PredictionSet>& candidates) {
    if (activation.size() != candidates.size()) {
        throw ValidationError("activation vector length " +
                              std::to_string(activation.size()) + " does not match " +
                              std::to_string(candidates.size()) + " prediction files");
    }
    std::vector<std::string> active;
    for (std::size_t i = 0; i < activation.size(); ++i) {
        if (activation[i] == '1') active.push_back(candidates[i].mode_id);
        else if (activation[i] != '0') {
            throw ValidationError("activation vector must be 0/1 characters or 'auto'");
        }
    }
    if (active.empty()) throw ValidationError("activation selects no mode");
    return active;
}

int cmd_ensemble(const EnsembleArgs& a, std::ostream& out) {
    std::vector<PredictionSet> candidates;
    candidates.reserve(a.predictions.size());
    for (const auto& f : a.predictions) candidates.push_back(load_predictions(f));

    QuestionSet qs = load_question_inputs(a.questions, a.labels);

    EnsembleSpec spec;
    if (a.activation == "auto") {
        spec = select_modes(candidates, qs, a.max_k);
    } else {
        spec = make_ensemble_spec(candidates, qs, parse_activation(a.activation, candidates));
    }

    const auto decisions = fuse(spec, candidates);

    const std::filesystem::path out_dir(a.out_dir);
    if (a.questions.empty()) {
        write_submission(decisions, out_dir / "submission.json");
    } else {
        write_submission(decisions, qs, out_dir / "submission.json");
    }
    write_file(out_dir / "ensemble_spec.json", spec.to_json().dump(2) + "\n");
    SimilarityReport rep = similarity_report(candidates);
    write_file(out_dir / "similarity.tsv", rep.table);
    write_file(out_dir / "similarity.json", rep.machine.dump(2) + "\n");

    out << "active:";
    for (const auto& id : spec.active) out << " " << id;
    out << "\n";
    for (const auto& id : spec.active) {
        const ModeWeight& w = spec.weights.at(id);
        out << "  " << id << ": w=" << format_percent(w.w) << " (n=" << w.n_eval
            << "), effective " << effective_weight(id, spec) << "\n";
    }
    out << "labeled accuracy: " << format_percent(ensemble_accuracy(spec, candidates, qs))
        << "\n";
    out << "wrote " << (out_dir / "submission.json").string() << "\n";
    return static_cast<int>(ExitCode::ok);
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    QuestionSet qs = load_question_inputs(a.questions, a.labels);
    json report = json::object();
    for (const auto& f : a.predictions) {
        PredictionSet preds = load_predictions(f);
        ModeWeight w = compute_weight(preds, qs);
        out << preds.mode_id << "\t" << format_percent(w.w) << "\t(n=" << w.n_eval << ")\n";
        report[preds.mode_id] = {{"accuracy", w.w}, {"n_eval", w.n_eval}};
    }
    if (!a.out_file.empty()) write_file(a.out_file, report.dump(2) + "\n");
    return static_cast<int>(ExitCode::ok);
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
    std::vector<PredictionSet> candidates;
    candidates.reserve(a.predictions.size());
    for (const auto& f : a.predictions) candidates.push_back(load_predictions(f));

    SimilarityReport rep = similarity_report(candidates);
    out << rep.table;

    const std::filesystem::path out_dir(a.out_dir);
    if (!a.out_dir.empty()) {
        write_file(out_dir / "similarity.tsv", rep.table);
        write_file(out_dir / "similarity.json", rep.machine.dump(2) + "\n");
    }

    if (a.sweep) {
        if (a.labels.empty()) throw ConfigError("--sweep needs --labels");
        if (candidates.size() > 12) {
            throw ValidationError("sweep over " + std::to_string(candidates.size()) +
                                  " modes would enumerate too many subsets (max 12)");
        }
        QuestionSet qs = questions_from_labels(load_labels(a.labels));
        SweepTable table =
            activation_sweep(all_activations(candidates.size()), candidates, qs);
        out << table.table();
        if (!a.out_dir.empty()) {
            write_file(out_dir / "sweep.tsv", table.table());
            write_file(out_dir / "sweep.json", table.to_json().dump(2) + "\n");
        }
    }
    return static_cast<int>(ExitCode::ok);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"mode-ensemble toolkit for multiple-choice video QA"};
    app.name("modefuse");
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "execute modes over a question set");
    run->add_option("--config", run_args.config, "config file (backends, modes, paths)")
        ->required();
    run->add_option("--modes", run_args.modes, "mode ids to run (default: all)")
        ->delimiter(',');
    run->add_option("--questions", run_args.questions, "question file")->required();
    run->add_option("--labels", run_args.labels, "labels file merged into the questions");
    run->add_option("--out", run_args.out_dir, "output directory")->required();
    run->add_option("--workers", run_args.workers, "worker threads per mode")
        ->check(CLI::PositiveNumber);
    run->add_flag("--offline", run_args.offline, "forbid network backends");
    run->add_option("--seed", run_args.seed, "override every mock backend seed");

    EnsembleArgs ens_args;
    CLI::App* ens = app.add_subcommand("ensemble", "fuse prediction files into a submission");
    ens->add_option("predictions", ens_args.predictions, "prediction files (one per mode)")
        ->required()
        ->expected(-1);
    ens->add_option("--questions", ens_args.questions, "question file (with truths)");
    ens->add_option("--labels", ens_args.labels, "labels file");
    ens->add_option("--activation", ens_args.activation,
                    "0/1 per prediction file, or 'auto' (default)");
    ens->add_option("--out", ens_args.out_dir, "output directory")->required();
    ens->add_option("--max-k", ens_args.max_k, "selection size cap for 'auto'")
        ->check(CLI::PositiveNumber);

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "accuracy of prediction files");
    eval->add_option("predictions", eval_args.predictions, "prediction files")
        ->required()
        ->expected(-1);
    eval->add_option("--questions", eval_args.questions, "question file (with truths)");
    eval->add_option("--labels", eval_args.labels, "labels file");
    eval->add_option("--out", eval_args.out_file, "machine-readable report file");

    ReportArgs rep_args;
    CLI::App* rep = app.add_subcommand("report", "similarity matrix and activation sweep");
    rep->add_option("predictions", rep_args.predictions, "prediction files (>=2)")
        ->required()
        ->expected(-1);
    rep->add_option("--labels", rep_args.labels, "labels file (needed for --sweep)");
    rep->add_option("--out", rep_args.out_dir, "output directory");
    rep->add_flag("--sweep", rep_args.sweep, "evaluate every activation vector");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return static_cast<int>(ExitCode::ok);
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::usage);
    }

    try {
        if (run->parsed()) {
            run_args.seed_set = run->count("--seed") > 0;
            return cmd_run(run_args, out);
        }
        if (ens->parsed()) return cmd_ensemble(ens_args, out);
        if (eval->parsed()) return cmd_eval(eval_args, out);
        if (rep->parsed()) return cmd_report(rep_args, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::validation);
    }
    err << "usage error: no command\n";
    return static_cast<int>(ExitCode::usage);
}

}  // namespace modefuse
