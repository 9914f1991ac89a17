#include <math.h>
#include <stdio.h>
#include "msstarch.h"

#define CHECK(call)                                                        \
  do {                                                                     \
    MsStatus s_ = (call);                                                  \
    if (s_ != MS_STATUS_OK) {                                              \
      fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, ms_last_error());  \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(void) {
  MsWeights *w = NULL;
  MsPanel *panel = NULL;
  MsModelParams params;
  double ll = 0.0;
  double filtered[2 * 40], smoothed[2 * 40];
  uint8_t states[40];

  CHECK(ms_reference_params(&params));
  CHECK(ms_weights_queen_grid(3, 3, true, &w));
  CHECK(ms_simulate(&params, w, 40, 10, 7, &panel, states));
  params.regimes[0].phi += -1.2703628454614782;
  params.regimes[1].phi += -1.2703628454614782;
  CHECK(ms_loglik(&params, panel, w, &ll));
  CHECK(ms_smooth(&params, panel, w, filtered, smoothed, 80));
  for (int t = 0; t < 40; t++) {
    if (fabs(smoothed[2 * t] + smoothed[2 * t + 1] - 1.0) > 1e-10) return 2;
  }
  if (ms_weights_queen_grid(3, 3, true, NULL) != MS_STATUS_NULL_POINTER) return 3;
  if (ms_last_error() == NULL) return 4;
  printf("loglik %.6f\n", ll);
  ms_panel_free(panel);
  ms_weights_free(w);
  return isfinite(ll) ? 0 : 5;
}
