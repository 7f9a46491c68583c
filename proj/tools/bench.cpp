#include "mdae/model.hpp"
#include "mdae/parallel.hpp"

#include <chrono>
#include <cstdio>

using namespace mdae;

namespace {

double seconds(const std::function<void()>& fn, int reps) {
    const auto start = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    return dt.count() / reps;
}

void report(const char* name, double serial, double parallel) {
    std::printf("%-28s serial %8.3f ms   parallel %8.3f ms   speedup %.2fx\n", name,
                serial * 1e3, parallel * 1e3, serial / parallel);
}

} // namespace

int main() {
    std::printf("workers: %d\n", worker_count(thread_cap()));

    SynthConfig cfg;
    cfg.samples_per_cell = 4;
    cfg.frames = 400; // long clips so per-frame parallelism has room
    const SynthDataset ds = generate_synthetic_dataset(cfg, 1);
    const SkeletonChain chain = synthetic_chain();
    const MotionSequence& seq = ds.sequences.front();

    const PoseFeatures feats = encode_sequence(seq, chain);
    report("encode_sequence",
           seconds([&] { (void)encode_sequence_serial(seq, chain); }, 20),
           seconds([&] { (void)encode_sequence(seq, chain); }, 20));
    report("decode_sequence",
           seconds([&] { (void)decode_sequence_serial(feats); }, 20),
           seconds([&] { (void)decode_sequence(feats); }, 20));

    // Batch loss + gradients: parallel over batch items.
    Dims dims;
    dims.feature_dim = 3 + 6 * chain.link_count();
    dims.max_frames = 48;
    Rng rng(7);
    ModelParams model = init_model(dims, rng);
    const NoiseSchedule sched = make_schedule(model.sched_kind, model.sched_T);
    TrainConfig tcfg;
    std::vector<BatchItem> batch;
    SkeletonChain measured = chain;
    std::vector<std::string> foot_markers;
    for (int i = 0; i < 8; ++i) {
        SynthConfig small = cfg;
        small.frames = 40;
        small.samples_per_cell = 1;
        const SynthDataset d2 = generate_synthetic_dataset(small, 100 + i);
        const PoseFeatures f = encode_sequence(d2.sequences.front(), chain);
        batch.push_back({f.as_tensor(), f.frames(), f.contacts});
        measured = f.chain;
        foot_markers = f.foot_markers;
    }
    ParamSet grads = model.params.zeros_like();
    const auto loss_once = [&](int cap) {
        const int old = thread_cap();
        set_thread_cap(cap);
        Rng r(3);
        (void)loss_total(model, batch, tcfg, sched, measured, foot_markers, r, &grads);
        set_thread_cap(old);
    };
    report("loss_total(grad, batch 8)", seconds([&] { loss_once(1); }, 3),
           seconds([&] { loss_once(0); }, 3));
    return 0;
}
