// covilearn: train, evaluate, inspect and serve chest X-ray screening models.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "covilearn/architecture.hpp"
#include "covilearn/dataset.hpp"
#include "covilearn/errors.hpp"
#include "covilearn/evaluation.hpp"
#include "covilearn/image.hpp"
#include "covilearn/service.hpp"
#include "covilearn/synthetic.hpp"
#include "covilearn/training.hpp"
#include "covilearn/weights_io.hpp"

namespace cl = covilearn;

namespace {

std::optional<cl::ChannelMean> parse_channel_mean(const std::string& text) {
    if (text.empty()) return std::nullopt;
    cl::ChannelMean mean{};
    std::istringstream in(text);
    std::string part;
    std::size_t i = 0;
    while (std::getline(in, part, ',')) {
        if (i == 3) throw cl::ArgumentError("--channel-mean takes three comma-separated values");
        try {
            mean[i++] = std::stod(part);
        } catch (const std::exception&) {
            throw cl::ArgumentError("--channel-mean: '" + part + "' is not a number");
        }
    }
    if (i != 3) throw cl::ArgumentError("--channel-mean takes three comma-separated values");
    return mean;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw cl::IoError("cannot write '" + path + "'");
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

struct TrainArgs {
    std::string manifest, variant = "densenet121-gapdense", out_weights, out_history, init_weights;
    std::size_t epochs = 25, batch_size = 16;
    std::uint64_t seed = 42;
    double lr = 1e-3;
    bool augment = false, subtract_mean = false;
};

int run_train(const TrainArgs& a) {
    if (a.augment && a.subtract_mean)
        throw cl::ArgumentError("--augment and --subtract-mean cannot be combined");
    const auto variant = cl::ModelVariant::parse(a.variant);
    const auto graph = cl::assemble_model(variant);
    auto data = cl::load_splits(cl::DatasetManifest::read_csv(a.manifest), graph.input_shape().back(), a.seed,
                                a.subtract_mean);
    std::cout << "train " << data.train.size() << " / test " << data.test.size() << " samples\n";

    auto params = cl::initialize_parameters(graph, a.seed);
    if (!a.init_weights.empty()) {
        const auto loaded = cl::deserialize_weights(cl::read_file_bytes(a.init_weights), graph, cl::WeightsMatch::Subset);
        for (const auto& [name, value] : loaded) params.set(name, value);
    }

    cl::TrainConfig config;
    config.epochs = a.epochs;
    config.batch_size = a.batch_size;
    config.adam.lr = a.lr;
    config.seed = a.seed;
    if (a.augment) config.augmentation = cl::AugmentPolicy{};

    auto result = cl::train(graph, std::move(params), data.train, data.test, config);
    for (const auto& r : result.history) {
        std::cout << "epoch " << r.epoch << "  loss " << fixed4(r.train_loss) << "  acc " << fixed4(r.train_acc);
        if (r.val_loss) std::cout << "  val_loss " << fixed4(*r.val_loss) << "  val_acc " << fixed4(*r.val_acc);
        std::cout << '\n';
    }
    cl::write_weights_file(a.out_weights, result.params, graph);
    std::cout << "weights written to " << a.out_weights << '\n';
    if (!a.out_history.empty()) {
        write_text(a.out_history, cl::history_to_json(result.history, config, cl::kHeadDropoutRate, data.channel_mean));
        std::cout << "history written to " << a.out_history << '\n';
    }
    if (data.channel_mean) {
        const auto& m = *data.channel_mean;
        std::cout.precision(17);
        std::cout << "channel mean " << m[0] << ',' << m[1] << ',' << m[2] << '\n';
    }
    return 0;
}

struct EvalArgs {
    std::string manifest, weights, variant = "densenet121-gapdense", out_report, roc_csv;
    std::uint64_t seed = 42;
    bool subtract_mean = false;
};

int run_eval(const EvalArgs& a) {
    const auto variant = cl::ModelVariant::parse(a.variant);
    const auto graph = cl::assemble_model(variant);
    const auto bytes = cl::read_file_bytes(a.weights);
    const auto params = cl::deserialize_weights(bytes, graph);
    auto data = cl::load_splits(cl::DatasetManifest::read_csv(a.manifest), graph.input_shape().back(), a.seed,
                                a.subtract_mean);

    cl::Provenance prov;
    prov.variant = variant.name();
    prov.head = std::string(cl::to_string(variant.head));
    prov.seed = a.seed;
    prov.subtract_mean = a.subtract_mean;
    prov.weights_digest = cl::sha256_hex(bytes);
    const auto report = cl::evaluate(graph, params, data.test, prov);
    std::cout << report.summary();
    if (!a.out_report.empty()) write_text(a.out_report, report.to_json());
    if (!a.roc_csv.empty()) write_text(a.roc_csv, report.roc_csv());
    return 0;
}

struct PredictArgs {
    std::string image, weights, variant = "densenet121-gapdense", channel_mean;
    bool json = false;
};

int run_predict(const PredictArgs& a) {
    const auto model = cl::load_model(cl::ModelVariant::parse(a.variant), a.weights, parse_channel_mean(a.channel_mean));
    const auto result = cl::screen_image(*model, cl::read_file_bytes(a.image), a.image);
    if (a.json) {
        std::cout << result.to_json() << '\n';
    } else {
        std::cout << "label: " << cl::to_string(result.label) << '\n'
                  << "probabilities: covid=" << fixed4(result.probabilities[0])
                  << " normal=" << fixed4(result.probabilities[1]) << '\n'
                  << "model: " << result.model_id << '\n';
    }
    return 0;
}

struct ServeArgs {
    std::string addr, weights, variant, log, webhook, channel_mean;
    std::size_t max_body_mib = 32;
};

cl::ScreeningService* g_service = nullptr;

void handle_signal(int) {
    if (g_service) g_service->stop();
}

int run_serve(const ServeArgs& a) {
    cl::ServiceConfig config;
    config.apply_environment();
    if (!a.addr.empty()) config.set_address(a.addr);
    if (!a.weights.empty()) config.weights_path = a.weights;
    if (!a.variant.empty()) config.variant = a.variant;
    if (!a.log.empty()) config.log_path = a.log;
    config.webhook_url = a.webhook;
    config.max_body_bytes = a.max_body_mib << 20;
    config.channel_mean = parse_channel_mean(a.channel_mean);
    if (config.weights_path.empty()) throw cl::ArgumentError("serve needs --weights or CVL_WEIGHTS");

    cl::ScreeningService service(config);
    g_service = &service;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cout << "serving " << service.registry().active()->entry.model_id << " on " << config.host << ':'
              << config.port << std::endl;
    service.run();
    g_service = nullptr;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CoviLearn chest X-ray screening toolkit"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "train the classification head on a manifest");
    t->add_option("--manifest", train.manifest, "CSV manifest (path,label[,split])")->required();
    t->add_option("--variant", train.variant, "model variant")->capture_default_str();
    t->add_option("--epochs", train.epochs)->capture_default_str();
    t->add_option("--seed", train.seed)->capture_default_str();
    t->add_option("--batch-size", train.batch_size)->capture_default_str();
    t->add_option("--lr", train.lr)->capture_default_str();
    t->add_option("--out-weights", train.out_weights)->required();
    t->add_option("--out-history", train.out_history);
    t->add_option("--init-weights", train.init_weights, "weights to import before training (e.g. a backbone)");
    t->add_flag("--augment", train.augment, "random augmentation of training images");
    t->add_flag("--subtract-mean", train.subtract_mean, "subtract the train-split channel mean");

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "evaluate weights on the test split of a manifest");
    e->add_option("--manifest", eval.manifest)->required();
    e->add_option("--weights", eval.weights)->required();
    e->add_option("--variant", eval.variant)->capture_default_str();
    e->add_option("--out-report", eval.out_report, "metrics report JSON");
    e->add_option("--roc-csv", eval.roc_csv, "ROC points as CSV");
    e->add_option("--seed", eval.seed, "split seed when the manifest has no split column")->capture_default_str();
    e->add_flag("--subtract-mean", eval.subtract_mean);

    PredictArgs pred;
    auto* p = app.add_subcommand("predict", "classify one image");
    p->add_option("--image", pred.image)->required();
    p->add_option("--weights", pred.weights)->required();
    p->add_option("--variant", pred.variant)->capture_default_str();
    p->add_option("--channel-mean", pred.channel_mean, "r,g,b mean to subtract");
    p->add_flag("--json", pred.json);

    ServeArgs serve;
    auto* s = app.add_subcommand("serve", "run the HTTP screening service");
    s->add_option("--addr", serve.addr, "host:port (CVL_ADDR)");
    s->add_option("--weights", serve.weights, "(CVL_WEIGHTS)");
    s->add_option("--variant", serve.variant);
    s->add_option("--log", serve.log, "audit log path (CVL_LOG)");
    s->add_option("--webhook", serve.webhook, "URL receiving each audit record");
    s->add_option("--max-body-mib", serve.max_body_mib)->capture_default_str();
    s->add_option("--channel-mean", serve.channel_mean, "r,g,b mean to subtract");

    std::string inspect_variant = "densenet121-gapdense";
    auto* i = app.add_subcommand("inspect", "print the per-layer parameter table");
    i->add_option("--variant", inspect_variant)->capture_default_str();

    std::string init_variant = "densenet121-gapdense", init_out;
    std::uint64_t init_seed = 42;
    auto* n = app.add_subcommand("init", "write freshly initialized weights");
    n->add_option("--variant", init_variant)->capture_default_str();
    n->add_option("--seed", init_seed)->capture_default_str();
    n->add_option("--out-weights", init_out)->required();

    std::string synth_dir;
    std::size_t synth_count = 200, synth_size = 32;
    std::uint64_t synth_seed = 7;
    auto* y = app.add_subcommand("synth", "write the separable synthetic image set");
    y->add_option("--out", synth_dir)->required();
    y->add_option("--count", synth_count)->capture_default_str();
    y->add_option("--size", synth_size)->capture_default_str();
    y->add_option("--seed", synth_seed)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*t) return run_train(train);
        if (*e) return run_eval(eval);
        if (*p) return run_predict(pred);
        if (*s) return run_serve(serve);
        if (*i) {
            std::cout << cl::format_parameter_table(cl::assemble_model(cl::ModelVariant::parse(inspect_variant)));
            return 0;
        }
        if (*n) {
            const auto graph = cl::assemble_model(cl::ModelVariant::parse(init_variant));
            cl::write_weights_file(init_out, cl::initialize_parameters(graph, init_seed), graph);
            std::cout << "weights written to " << init_out << '\n';
            return 0;
        }
        if (*y) {
            const auto m = cl::write_synthetic_dataset(synth_dir, synth_count, synth_size, synth_seed);
            std::cout << m.size() << " images and manifest.csv written to " << synth_dir << '\n';
            return 0;
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 1;
}
