#ifndef SLM_EM_HPP_
#define SLM_EM_HPP_

#include <string>
#include <vector>

#include "slm/decoder.hpp"
#include "slm/model_set.hpp"

namespace slm {

struct EMConfig {
  size_t iterations = 3;
  // Parses kept per sentence in the E-step; defaults to the beam width.
  size_t nbest = 0;  // 0 = use decoder beam
  DecoderOptions decode;
  double weight_tol = 1e-6;
  size_t weight_max_iter = 100;
  size_t threads = 1;
};

struct EMIterationLog {
  size_t iteration = 0;
  size_t sentences = 0;
  size_t skipped = 0;
  size_t tokens = 0;       // predicted tokens incl. sentence-end
  double loglik = 0.0;     // sum over sentences of ln sum_{T in N-best} P(W,T)
  double train_ppl = 0.0;  // exp(-loglik / tokens)
};

// One N-best EM step. E-step: decode each sentence with recombination
// disabled so every hypothesis is a single parse, keep the N best complete
// parses, renormalize their posteriors within the list, and accumulate
// fractional counts along each retained derivation. M-step: rebuild the
// three component count tables and re-estimate interpolation weights on
// the gold heldout derivations. The trigram is left untouched. Sentences
// that fail to decode are skipped and counted in the log.
ModelSet em_iteration(const ModelSet &model,
                      const std::vector<std::vector<uint32_t>> &sentences,
                      const std::vector<IdDerivation> &heldout,
                      const EMConfig &cfg, EMIterationLog *log = nullptr);

}  // namespace slm

#endif  // SLM_EM_HPP_
