#include "melpc/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <map>

#include "melpc/analysis.hpp"
#include "melpc/checkpoint.hpp"
#include "melpc/common.hpp"
#include "melpc/csv.hpp"
#include "melpc/io_util.hpp"
#include "melpc/manifest.hpp"
#include "melpc/parallel.hpp"
#include "melpc/runconfig.hpp"
#include "melpc/stimuli.hpp"
#include "melpc/svg.hpp"
#include "melpc/train.hpp"

namespace fs = std::filesystem;

namespace melpc::cli {

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;  // key=value overrides
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "key=value config file");
    cmd->add_option("--set", opts.sets, "override a config key (key=value), repeatable");
}

RunConfig resolve_config(const CommonOpts& opts) {
    RunConfig cfg;
    if (!opts.config_path.empty()) load_config_file(cfg, opts.config_path);
    apply_env_overrides(cfg);
    for (const auto& kv : opts.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got: " + kv);
        set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

void write_resolved_config(const RunConfig& cfg, const std::string& dir) {
    atomic_write_file((fs::path(dir) / "config.resolved.txt").string(), serialize_config(cfg));
}

std::string config_keys_footer() {
    std::string out = "Config keys (config file, MELPC_* environment, or --set):\n";
    for (const auto& k : config_keys()) out += "  " + k.name + ": " + k.help + "\n";
    return out;
}

// ---- prepare ---------------------------------------------------------------

int cmd_prepare(const RunConfig& cfg, const std::string& corpus_dir, const std::string& out_dir) {
    std::vector<std::string> wavs;
    if (!fs::is_directory(corpus_dir)) throw DataError("not a directory: " + corpus_dir);
    for (const auto& entry : fs::directory_iterator(corpus_dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        for (auto& c : ext) c = static_cast<char>(std::tolower(c));
        if (ext == ".wav") wavs.push_back(entry.path().string());
    }
    if (wavs.empty()) throw DataError("no WAV files in " + corpus_dir);
    std::sort(wavs.begin(), wavs.end());
    fs::create_directories(out_dir);

    parallel_for(static_cast<int>(wavs.size()), cfg.train.workers, [&](int i) {
        dsp::AudioClip clip = dsp::load_audio(wavs[i], /*downmix=*/true);
        dsp::MelSpectrogram spec = dsp::mel_spectrogram(clip, cfg.train.dsp);
        spec.clip_id = fs::path(wavs[i]).stem().string();
        dsp::save_mels((fs::path(out_dir) / (spec.clip_id + ".mels")).string(), spec);
    });

    train::Manifest manifest =
        train::build_manifest(out_dir, cfg.train.val_fraction, cfg.train.seed);
    train::save_manifest((fs::path(out_dir) / "manifest.csv").string(), manifest);
    write_resolved_config(cfg, out_dir);
    log_info("cached " + std::to_string(wavs.size()) + " spectrograms into " + out_dir);
    return 0;
}

// ---- gen-stimuli / gen-corpus ----------------------------------------------

int cmd_gen_stimuli(const RunConfig& cfg, const std::string& out_dir) {
    stim::StimulusSet set = stim::generate_set(cfg.stim);
    fs::create_directories(out_dir);
    parallel_for(static_cast<int>(set.sequences.size()), cfg.train.workers, [&](int i) {
        const auto& seq = set.sequences[i];
        dsp::AudioClip clip = stim::synthesize(seq);
        dsp::write_wav16((fs::path(out_dir) / (seq.id + ".wav")).string(), clip);
    });
    stim::save_stimulus_manifest((fs::path(out_dir) / "stimuli.csv").string(), set);
    write_resolved_config(cfg, out_dir);
    log_info("generated " + std::to_string(set.sequences.size()) + " stimuli into " + out_dir);
    return 0;
}

int cmd_gen_corpus(const RunConfig& cfg, const std::string& out_dir) {
    stim::CorpusOptions opt;
    opt.n = cfg.corpus_n;
    opt.seed = cfg.corpus_seed;
    opt.clip_seconds = cfg.corpus_clip_seconds;
    std::vector<stim::CorpusClip> clips = stim::plan_corpus(opt);
    fs::create_directories(out_dir);
    parallel_for(static_cast<int>(clips.size()), cfg.train.workers, [&](int i) {
        dsp::AudioClip audio = stim::synthesize_corpus_clip(clips[i]);
        dsp::write_wav16((fs::path(out_dir) / (clips[i].seq.id + ".wav")).string(), audio);
    });
    write_resolved_config(cfg, out_dir);
    log_info("generated " + std::to_string(clips.size()) + " corpus clips into " + out_dir);
    return 0;
}

// ---- train -------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, const std::string& manifest_path,
              const std::string& out_checkpoint) {
    train::Manifest manifest = train::load_manifest(manifest_path);
    train::TrainResult result = train::train(manifest, cfg.train);
    if (fs::path(out_checkpoint).has_parent_path())
        fs::create_directories(fs::path(out_checkpoint).parent_path());
    model::save_checkpoint(out_checkpoint, result.net);
    train::save_loss_log(out_checkpoint + ".loss.csv", result.log);
    atomic_write_file(out_checkpoint + ".config.txt", serialize_config(cfg));
    if (!result.log.empty())
        log_info("best epoch " + std::to_string(result.best_epoch) + ", val loss " +
                 format_double(result.log[result.best_epoch - 1].val_loss));
    return 0;
}

// ---- evaluate / analyze ------------------------------------------------------

struct StimulusData {
    stim::StimulusSet set;
    std::vector<analysis::StimulusEval> evals;  // ordered like set.sequences
    std::map<std::string, int> ranking;
    std::vector<double> totals;  // ordered like set.sequences
};

StimulusData evaluate_stimulus_dir(const RunConfig& cfg, const model::PredNet& net,
                                   const std::string& stim_dir, const std::string& ratings_path) {
    StimulusData data;
    data.set = stim::load_stimulus_manifest((fs::path(stim_dir) / "stimuli.csv").string());
    if (!ratings_path.empty()) stim::load_ratings(ratings_path, data.set);
    data.ranking = data.set.has_ratings()
                       ? analysis::ranking_from_ratings(data.set)
                       : analysis::proxy_ranking_by_interval(data.set, cfg.train.dsp);

    const int n = static_cast<int>(data.set.sequences.size());
    data.evals.resize(n);
    parallel_for(n, cfg.train.workers, [&](int i) {
        const auto& seq = data.set.sequences[i];
        const std::string wav = (fs::path(stim_dir) / (seq.id + ".wav")).string();
        dsp::AudioClip clip = dsp::load_audio(wav, /*downmix=*/true);
        dsp::MelSpectrogram spec = dsp::mel_spectrogram(clip, cfg.train.dsp);
        if (spec.rows != net.config().frame_rows)
            throw DataError("spectrogram rows " + std::to_string(spec.rows) +
                            " do not match the checkpoint frame rows");
        data.evals[i] = analysis::evaluate_stimulus(net, seq.id, spec, cfg.eval_hop);
    });
    data.totals.reserve(n);
    for (const auto& e : data.evals) data.totals.push_back(e.total_error);
    return data;
}

void write_per_sequence(const StimulusData& data, const std::string& out_dir) {
    std::vector<std::string> ids;
    std::vector<int> ranks;
    for (const auto& seq : data.set.sequences) {
        ids.push_back(seq.id);
        ranks.push_back(data.ranking.at(seq.id));
    }
    analysis::write_per_sequence_csv((fs::path(out_dir) / "per_sequence.csv").string(), ids,
                                     data.totals, ranks);
}

int cmd_evaluate(const RunConfig& cfg, const std::string& checkpoint,
                 const std::string& stim_dir, const std::string& ratings_path,
                 const std::string& out_dir) {
    model::PredNet net = model::load_checkpoint(checkpoint);
    StimulusData data = evaluate_stimulus_dir(cfg, net, stim_dir, ratings_path);
    fs::create_directories(out_dir);
    write_per_sequence(data, out_dir);
    write_resolved_config(cfg, out_dir);
    return 0;
}

int cmd_analyze(const RunConfig& cfg, const std::string& checkpoint, const std::string& stim_dir,
                const std::string& ratings_path, const std::string& which,
                const std::string& out_dir) {
    if (which != "all" && which != "timelapse" && which != "interval" && which != "context")
        throw UsageError("--which must be all|timelapse|interval|context");
    if (cfg.eval_hop != 1)
        throw DataError("timelapse-based analyses require eval.hop=1");

    model::PredNet net = model::load_checkpoint(checkpoint);
    StimulusData data = evaluate_stimulus_dir(cfg, net, stim_dir, ratings_path);
    fs::create_directories(out_dir);
    write_per_sequence(data, out_dir);

    auto groups = analysis::assign_groups(data.ranking, cfg.analysis_group_size);
    analysis::TimelapseResult timelapse = analysis::error_by_timelapse(
        data.evals, data.set, cfg.train.dsp, cfg.analysis_x_max, groups);

    std::vector<analysis::RegressionRow> rows;
    if (which == "all") {
        std::vector<double> errors;
        std::vector<int> ranks;
        std::vector<double> rank_doubles;
        for (size_t i = 0; i < data.set.sequences.size(); ++i) {
            errors.push_back(data.totals[i]);
            ranks.push_back(data.ranking.at(data.set.sequences[i].id));
            rank_doubles.push_back(ranks.back());
        }
        rows.push_back({"musicality", "", analysis::musicality_regression(errors, ranks)});
        rows.push_back({"musicality_spearman", "", stats::spearman(rank_doubles, errors)});
    }
    if (which == "all" || which == "timelapse") {
        analysis::write_timelapse_csv((fs::path(out_dir) / "timelapse.csv").string(),
                                      timelapse.errors);
    }
    if (which == "all" || which == "interval") {
        analysis::write_interval_csv((fs::path(out_dir) / "interval.csv").string(),
                                     timelapse.errors);
        for (int x : cfg.analysis_interval_x)
            rows.push_back({"interval", std::to_string(x),
                            analysis::interval_regression(timelapse.errors, x)});
    }
    if (which == "all" || which == "context") {
        analysis::ContextResult context = analysis::context_effect(
            timelapse.errors, data.set, cfg.train.dsp, groups, cfg.analysis_context_x);
        analysis::write_context_csv((fs::path(out_dir) / "context.csv").string(), context);
        for (int x : cfg.analysis_interval_x) {
            analysis::ContextResult cr = analysis::context_effect(timelapse.errors, data.set,
                                                                  cfg.train.dsp, groups, x);
            if (cr.regression.n >= 3)
                rows.push_back({"context", std::to_string(x), cr.regression});
        }
    }
    analysis::write_regressions_csv((fs::path(out_dir) / "regressions.csv").string(), rows);
    write_resolved_config(cfg, out_dir);
    return 0;
}

// ---- plot --------------------------------------------------------------------

int cmd_plot(const std::string& csv_path, const std::string& out_path, const std::string& x_col,
             const std::string& y_col, const std::string& mode, bool fit,
             const std::string& title) {
    CsvTable table = csv_read_file(csv_path);
    if (table.rows.empty()) throw DataError("plot: CSV has no data rows");
    int xi = 0, yi = 1;
    if (!x_col.empty()) xi = table.require_column(x_col);
    if (!y_col.empty()) yi = table.require_column(y_col);
    if (x_col.empty() || y_col.empty()) {
        if (table.header.size() < 2) throw DataError("plot: CSV needs at least two columns");
    }
    svg::Series series;
    series.name = table.header[yi];
    for (const auto& row : table.rows) {
        try {
            series.x.push_back(std::stod(row[xi]));
            series.y.push_back(std::stod(row[yi]));
        } catch (const std::exception&) {
            throw DataError("plot: non-numeric value in row: " + row[xi] + "," + row[yi]);
        }
    }
    svg::PlotOptions opt;
    opt.title = title;
    opt.x_label = table.header[xi];
    opt.y_label = table.header[yi];
    if (mode == "scatter") {
        opt.line = false;
        opt.scatter = true;
    } else if (mode != "line") {
        throw UsageError("--mode must be line or scatter");
    }
    opt.fit_line = fit;
    atomic_write_file(out_path, svg::render_plot({series}, opt));
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"mel-spectrogram predictive-coding pipeline"};
    app.require_subcommand(1);
    app.footer(config_keys_footer());

    CommonOpts prepare_opts, stim_opts, corpus_opts, train_opts, eval_opts, analyze_opts;
    std::string prepare_corpus, prepare_out;
    auto* prepare = app.add_subcommand("prepare", "cache spectrograms and build a manifest");
    prepare->add_option("--corpus", prepare_corpus, "directory of WAV files")->required();
    prepare->add_option("--out", prepare_out, "output directory")->required();
    add_common(prepare, prepare_opts);

    std::string stim_out;
    auto* gen_stimuli = app.add_subcommand("gen-stimuli", "generate random pitch-sequence stimuli");
    gen_stimuli->add_option("--out", stim_out, "output directory")->required();
    add_common(gen_stimuli, stim_opts);

    std::string corpus_out;
    auto* gen_corpus = app.add_subcommand("gen-corpus", "generate a synthetic tonal corpus");
    gen_corpus->add_option("--out", corpus_out, "output directory")->required();
    add_common(gen_corpus, corpus_opts);

    std::string train_manifest, train_out;
    auto* train_cmd = app.add_subcommand("train", "train the model from a manifest");
    train_cmd->add_option("--manifest", train_manifest, "manifest CSV")->required();
    train_cmd->add_option("--out", train_out, "output checkpoint path")->required();
    add_common(train_cmd, train_opts);

    std::string eval_ckpt, eval_stim, eval_ratings, eval_out;
    auto* evaluate = app.add_subcommand("evaluate", "per-stimulus total prediction errors");
    evaluate->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    evaluate->add_option("--stimuli", eval_stim, "stimulus directory (stimuli.csv + WAVs)")
        ->required();
    evaluate->add_option("--ratings", eval_ratings, "ratings CSV (stimulus_id,mean_rating,rank)");
    evaluate->add_option("--out", eval_out, "output directory")->required();
    add_common(evaluate, eval_opts);

    std::string an_ckpt, an_stim, an_ratings, an_which = "all", an_out;
    auto* analyze = app.add_subcommand("analyze", "timelapse, interval and context analyses");
    analyze->add_option("--checkpoint", an_ckpt, "model checkpoint")->required();
    analyze->add_option("--stimuli", an_stim, "stimulus directory")->required();
    analyze->add_option("--ratings", an_ratings, "ratings CSV");
    analyze->add_option("--which", an_which, "all|timelapse|interval|context");
    analyze->add_option("--out", an_out, "output directory")->required();
    add_common(analyze, analyze_opts);

    std::string plot_csv, plot_out, plot_x, plot_y, plot_mode = "line", plot_title;
    bool plot_fit = false;
    auto* plot = app.add_subcommand("plot", "render a CSV as an SVG plot");
    plot->add_option("--csv", plot_csv, "input CSV")->required();
    plot->add_option("--out", plot_out, "output SVG path")->required();
    plot->add_option("--x", plot_x, "x column name (default: first column)");
    plot->add_option("--y", plot_y, "y column name (default: second column)");
    plot->add_option("--mode", plot_mode, "line|scatter");
    plot->add_flag("--fit", plot_fit, "draw the OLS regression line");
    plot->add_option("--title", plot_title, "plot title");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "usage_error: %s\n", e.what());
        return 2;
    }

    try {
        if (prepare->parsed()) return cmd_prepare(resolve_config(prepare_opts), prepare_corpus,
                                                  prepare_out);
        if (gen_stimuli->parsed()) return cmd_gen_stimuli(resolve_config(stim_opts), stim_out);
        if (gen_corpus->parsed()) return cmd_gen_corpus(resolve_config(corpus_opts), corpus_out);
        if (train_cmd->parsed())
            return cmd_train(resolve_config(train_opts), train_manifest, train_out);
        if (evaluate->parsed())
            return cmd_evaluate(resolve_config(eval_opts), eval_ckpt, eval_stim, eval_ratings,
                                eval_out);
        if (analyze->parsed())
            return cmd_analyze(resolve_config(analyze_opts), an_ckpt, an_stim, an_ratings,
                               an_which, an_out);
        if (plot->parsed())
            return cmd_plot(plot_csv, plot_out, plot_x, plot_y, plot_mode, plot_fit, plot_title);
        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage_error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric_error: %s\n", e.what());
        return 4;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data_error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "data_error: %s\n", e.what());
        return 3;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.push_back("melpc");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const auto& a : full) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace melpc::cli
