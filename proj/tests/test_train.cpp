#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "melpc/checkpoint.hpp"
#include "melpc/common.hpp"
#include "melpc/manifest.hpp"
#include "melpc/stimuli.hpp"
#include "melpc/train.hpp"
#include "test_util.hpp"

using namespace melpc;
using test_util::TempDir;

namespace {

// Small synthetic WAV corpus + config sized for unit tests: 32 mel bands,
// 16-column frames.
train::TrainConfig tiny_train_config() {
    train::TrainConfig cfg;
    cfg.frame_cols = 16;
    cfg.frame_hop = 4;
    cfg.sequence_length = 4;
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.learning_rate = 1e-3;
    cfg.seed = 99;
    cfg.channel_preset = "desk";
    cfg.dsp.n_mels = 32;
    return cfg;
}

void write_tiny_corpus(const TempDir& dir, int n, double seconds = 0.9) {
    stim::CorpusOptions opt;
    opt.n = n;
    opt.seed = 21;
    opt.clip_seconds = seconds;
    for (const auto& clip : stim::plan_corpus(opt)) {
        dsp::AudioClip audio = stim::synthesize_corpus_clip(clip);
        dsp::write_wav16(dir.file(clip.seq.id + ".wav"), audio);
    }
}

bool params_equal(const model::PredNet& a, const model::PredNet& b, bool check_moments) {
    if (a.params().size() != b.params().size()) return false;
    for (size_t p = 0; p < a.params().size(); ++p) {
        const auto& ea = a.params()[p];
        const auto& eb = b.params()[p];
        if (ea.name != eb.name || ea.value != eb.value) return false;
        if (check_moments && (ea.m != eb.m || ea.v != eb.v)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("build_manifest: 100 clips at val fraction 0.1 split 90/10") {
    TempDir dir("manifest100");
    for (int i = 0; i < 100; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "tone_%03d.mels", i);
        test_util::write_file(dir.file(name), "placeholder");
    }
    train::Manifest m = train::build_manifest(dir.path.string(), 0.1, 42);
    REQUIRE(m.entries.size() == 100);
    CHECK(m.split("train").size() == 90);
    CHECK(m.split("val").size() == 10);
    for (const auto& e : m.entries) CHECK(e.label == "tone");

    SUBCASE("same seed twice gives the identical split") {
        train::Manifest again = train::build_manifest(dir.path.string(), 0.1, 42);
        for (size_t i = 0; i < m.entries.size(); ++i) {
            REQUIRE(again.entries[i].path == m.entries[i].path);
            REQUIRE(again.entries[i].split == m.entries[i].split);
        }
    }
    SUBCASE("different seed moves the split") {
        train::Manifest other = train::build_manifest(dir.path.string(), 0.1, 43);
        bool same = true;
        for (size_t i = 0; i < m.entries.size(); ++i)
            if (other.entries[i].split != m.entries[i].split) same = false;
        CHECK_FALSE(same);
    }
    SUBCASE("val fraction 0 tags everything train") {
        set_log_enabled(false);
        train::Manifest all_train = train::build_manifest(dir.path.string(), 0.0, 42);
        set_log_enabled(true);
        CHECK(all_train.split("train").size() == 100);
        CHECK(all_train.split("val").empty());
    }
}

TEST_CASE("build_manifest rejects empty or missing directories") {
    TempDir dir("manifest_empty");
    CHECK_THROWS_AS(train::build_manifest(dir.path.string(), 0.1, 1), DataError);
    CHECK_THROWS_AS(train::build_manifest(dir.file("nope"), 0.1, 1), DataError);
}

TEST_CASE("manifest CSV round-trips and validates") {
    TempDir dir("manifest_csv");
    train::Manifest m;
    m.entries = {{"a.mels", "train", "tone"}, {"b.mels", "val", "tone"}};
    const std::string path = dir.file("manifest.csv");
    train::save_manifest(path, m);
    train::Manifest loaded = train::load_manifest(path);
    REQUIRE(loaded.entries.size() == 2);
    CHECK(loaded.entries[0].path == "a.mels");
    CHECK(loaded.entries[1].split == "val");

    SUBCASE("duplicate path is rejected") {
        test_util::write_file(path, "path,split,label\nx.wav,train,a\nx.wav,val,a\n");
        CHECK_THROWS_AS(train::load_manifest(path), DataError);
    }
    SUBCASE("bad split tag is rejected") {
        test_util::write_file(path, "path,split,label\nx.wav,dev,a\n");
        CHECK_THROWS_AS(train::load_manifest(path), DataError);
    }
}

TEST_CASE("TrainConfig validation and preset mapping") {
    train::TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.sequence_length = 1;
    CHECK_THROWS_AS(cfg.validate(), DataError);

    cfg = train::TrainConfig{};
    cfg.channel_preset = "desk";
    model::PredNetConfig mc = cfg.model_config();
    CHECK(mc.channels == std::vector<int>{1, 16, 32, 64});
    CHECK(mc.lambda_layer == std::vector<double>{1, 0, 0, 0});

    cfg.lambda_preset = "weighted";
    mc = cfg.model_config();
    CHECK(mc.lambda_layer == std::vector<double>{1.0, 0.1, 0.1, 0.1});

    cfg.lambda_preset = "nope";
    CHECK_THROWS_AS(cfg.validate(), DataError);
}

TEST_CASE("load_split skips clips shorter than a frame or a sequence") {
    TempDir dir("split_skip");
    write_tiny_corpus(dir, 3, 0.9);
    {
        // One clip long enough for frames but not for a whole sequence.
        stim::PitchSequence seq;
        seq.id = "stub";
        seq.notes = {60};
        seq.note_duration = 0.25;
        dsp::write_wav16(dir.file("stub_000.wav"), stim::synthesize(seq));
    }
    train::Manifest m = train::build_manifest(dir.path.string(), 0.0, 7);

    train::TrainConfig cfg = tiny_train_config();
    set_log_enabled(false);
    train::LoadedSplit split = train::load_split(m, "train", cfg);
    set_log_enabled(true);
    CHECK(split.clips.size() == 3);  // the stub clip was skipped
    CHECK(split.sequences.size() == 3 * 4);
}

TEST_CASE("train with epochs=0 returns the initialized model and an empty log") {
    TempDir dir("train0");
    write_tiny_corpus(dir, 2);
    set_log_enabled(false);
    train::Manifest m = train::build_manifest(dir.path.string(), 0.0, 3);
    train::TrainConfig cfg = tiny_train_config();
    cfg.epochs = 0;
    train::TrainResult result = train::train(m, cfg);
    set_log_enabled(true);
    CHECK(result.log.empty());
    CHECK(result.best_epoch == 0);

    model::PredNet fresh(cfg.model_config());
    fresh.init_params(cfg.seed);
    CHECK(params_equal(result.net, fresh, /*check_moments=*/true));
}

TEST_CASE("training runs, logs finite losses, and is bit-reproducible") {
    TempDir dir("train_repro");
    write_tiny_corpus(dir, 6);
    set_log_enabled(false);
    train::Manifest m = train::build_manifest(dir.path.string(), 0.2, 5);
    train::TrainConfig cfg = tiny_train_config();

    train::TrainResult a = train::train(m, cfg);
    train::TrainResult b = train::train(m, cfg);
    set_log_enabled(true);

    REQUIRE(a.log.size() == 2);
    for (const auto& e : a.log) {
        REQUIRE(std::isfinite(e.train_loss));
        REQUIRE(std::isfinite(e.val_loss));
        REQUIRE(e.train_loss > 0.0);
    }
    REQUIRE(b.log.size() == a.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) {
        REQUIRE(a.log[i].train_loss == b.log[i].train_loss);
        REQUIRE(a.log[i].val_loss == b.log[i].val_loss);
    }
    CHECK(params_equal(a.net, b.net, /*check_moments=*/true));
}

TEST_CASE("multi-worker training reproduces the single-worker result") {
    TempDir dir("train_workers");
    write_tiny_corpus(dir, 4);
    set_log_enabled(false);
    train::Manifest m = train::build_manifest(dir.path.string(), 0.25, 5);
    train::TrainConfig cfg = tiny_train_config();
    cfg.epochs = 1;
    train::TrainResult serial = train::train(m, cfg);
    cfg.workers = 2;
    train::TrainResult parallel = train::train(m, cfg);
    set_log_enabled(true);
    // Fixed-order reduction makes the gradient sums identical.
    REQUIRE(serial.log.size() == parallel.log.size());
    for (size_t i = 0; i < serial.log.size(); ++i)
        REQUIRE(serial.log[i].train_loss == parallel.log[i].train_loss);
    CHECK(params_equal(serial.net, parallel.net, /*check_moments=*/true));
}

TEST_CASE("validation passes touch no parameters or moments") {
    TempDir dir("val_nograd");
    write_tiny_corpus(dir, 4);
    set_log_enabled(false);
    train::Manifest m = train::build_manifest(dir.path.string(), 0.5, 5);
    train::TrainConfig cfg = tiny_train_config();
    train::LoadedSplit val = train::load_split(m, "val", cfg);
    set_log_enabled(true);
    REQUIRE_FALSE(val.sequences.empty());

    model::PredNet net(cfg.model_config());
    net.init_params(123);
    model::PredNet before(cfg.model_config());
    before.init_params(123);

    const double loss = train::validation_loss(net, val.sequences, 2);
    CHECK(std::isfinite(loss));
    CHECK(params_equal(net, before, /*check_moments=*/true));
    CHECK(net.adam_step_count() == before.adam_step_count());
}

TEST_CASE("checkpoint save/load round-trips bit-exactly") {
    TempDir dir("ckpt");
    train::TrainConfig cfg = tiny_train_config();
    model::PredNet net(cfg.model_config());
    net.init_params(55);
    net.set_adam_step_count(17);

    const std::string path = dir.file("model.pnck");
    model::save_checkpoint(path, net);
    model::PredNet loaded = model::load_checkpoint(path);

    CHECK(loaded.adam_step_count() == 17);
    CHECK(params_equal(net, loaded, /*check_moments=*/true));

    // Forward on a fixed input gives identical bytes of output.
    Rng rng(77);
    std::vector<float> frame(static_cast<size_t>(32) * 16);
    for (auto& v : frame) v = static_cast<float>(rng.uniform(0, 255));
    auto s1 = net.zero_state();
    auto s2 = loaded.zero_state();
    auto r1 = net.step(s1, frame);
    auto r2 = loaded.step(s2, frame);
    REQUIRE(r1.prediction.size() == r2.prediction.size());
    CHECK(std::memcmp(r1.prediction.data(), r2.prediction.data(),
                      r1.prediction.size() * sizeof(float)) == 0);
}

TEST_CASE("checkpoint loader rejects corruption") {
    TempDir dir("ckpt_bad");
    train::TrainConfig cfg = tiny_train_config();
    model::PredNet net(cfg.model_config());
    net.init_params(5);
    const std::string path = dir.file("model.pnck");
    model::save_checkpoint(path, net);

    std::string blob;
    {
        std::ifstream in(path, std::ios::binary);
        blob.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    SUBCASE("bad magic") {
        std::string bad = blob;
        bad[0] = 'X';
        test_util::write_file(path, bad);
        CHECK_THROWS_WITH_AS(model::load_checkpoint(path), doctest::Contains("magic"), DataError);
    }
    SUBCASE("version mismatch") {
        std::string bad = blob;
        bad[4] = 9;
        test_util::write_file(path, bad);
        CHECK_THROWS_WITH_AS(model::load_checkpoint(path), doctest::Contains("version"),
                             DataError);
    }
    SUBCASE("truncation leaves no partial model") {
        test_util::write_file(path, blob.substr(0, blob.size() - 100));
        CHECK_THROWS_AS(model::load_checkpoint(path), DataError);
    }
    SUBCASE("edited config blob fails the hash check") {
        std::string bad = blob;
        auto pos = bad.find("frame_cols=16");
        REQUIRE(pos != std::string::npos);
        bad[pos + std::strlen("frame_cols=")] = '9';
        test_util::write_file(path, bad);
        CHECK_THROWS_WITH_AS(model::load_checkpoint(path), doctest::Contains("hash"), DataError);
    }
}

TEST_CASE("checkpoint from a different channel preset names the mismatched tensor") {
    TempDir dir("ckpt_mismatch");
    train::TrainConfig desk_cfg = tiny_train_config();
    train::TrainConfig stock_cfg = tiny_train_config();
    stock_cfg.channel_preset = "stock";

    model::PredNet desk_net(desk_cfg.model_config());
    desk_net.init_params(1);
    model::PredNet stock_net(stock_cfg.model_config());
    stock_net.init_params(1);

    model::save_checkpoint(dir.file("desk.pnck"), desk_net);
    model::save_checkpoint(dir.file("stock.pnck"), stock_net);

    auto read = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    std::string desk_blob = read(dir.file("desk.pnck"));
    std::string stock_blob = read(dir.file("stock.pnck"));

    // Splice: desk header + config blob, stock tensor section. The loader
    // must flag the first tensor whose dims disagree with the config.
    auto blob_len = [](const std::string& b) {
        return static_cast<size_t>(static_cast<unsigned char>(b[6])) |
               (static_cast<size_t>(static_cast<unsigned char>(b[7])) << 8) |
               (static_cast<size_t>(static_cast<unsigned char>(b[8])) << 16) |
               (static_cast<size_t>(static_cast<unsigned char>(b[9])) << 24);
    };
    std::string spliced = desk_blob.substr(0, 10 + blob_len(desk_blob)) +
                          stock_blob.substr(10 + blob_len(stock_blob));
    test_util::write_file(dir.file("spliced.pnck"), spliced);
    CHECK_THROWS_WITH_AS(model::load_checkpoint(dir.file("spliced.pnck")),
                         doctest::Contains("lstm.wx"), DataError);
}

TEST_CASE("copy-last-frame baseline scores shifted frame pairs") {
    std::vector<std::vector<float>> frames(3, std::vector<float>(8, 0.0f));
    frames[1].assign(8, 2.0f);
    frames[2].assign(8, 2.0f);
    // Steps: |f0-f1|^2 = 4, |f1-f2|^2 = 0 -> mean 2.
    CHECK(train::copy_baseline_mse(frames) == doctest::Approx(2.0));
    std::vector<std::vector<float>> one(1, std::vector<float>(8, 0.0f));
    CHECK_THROWS_AS(train::copy_baseline_mse(one), DataError);
}
