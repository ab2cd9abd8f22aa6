// Fits a student with the teacher's topology to a small synthetic dataset and
// compares the realized stage-1 EQ of both models.
//
//   teacher_student [epochs] [clips]

#include <cstdio>
#include <cstdlib>

#include "dbq/dbq.hpp"

int main(int argc, char** argv) {
  using namespace dbq;
  const std::size_t epochs = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 5;
  const std::size_t clips = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 8;

  const auto teacher = make_teacher();
  const auto records = generate_dataset(teacher, synth_source_clips(clips, 1), 4, 2);
  const auto examples = to_examples(teacher.spec, records);
  std::printf("%zu examples, %zu parameters\n", examples.size(), count_params(teacher.spec));

  TrainConfig config;
  config.epochs = epochs;
  config.learning_rate = 1e-2;
  config.seed = 1;
  const auto result = fit(teacher.spec, examples, config, [](const EpochRecord& r, const ModelState&, const AdamState&) {
    std::printf("epoch %3zu  train %.3e  val %.3e\n", r.epoch, r.train_mse, r.val_mse);
  });

  const Settings probe{{"DIST", 0.5}, {"LOW", 0.5}, {"HIGH", 0.5}, {"LEVEL", 0.5}};
  const auto cond = conditioning_from_settings(teacher.spec, probe, true);
  for (const auto* m : {&teacher.state, &result.state}) {
    std::printf("%s stage 1:\n", m == &teacher.state ? "teacher" : "student");
    for (const auto& s : eq_sections(stage_raw(teacher.spec, *m, 1, cond), teacher.spec.sample_rate))
      std::printf("  %-10s %8.1f Hz %+6.2f dB Q %.2f\n", to_string(s.kind), s.freq_hz, s.gain_db, s.q);
  }
  return 0;
}
