/* The public header must compile as C. */
#include <stdio.h>

#include "l2flow/l2flow.h"

int main(void) {
  l2flow_scenario* s = NULL;
  l2flow_status st = l2flow_scenario_parse("name = c\n", &s);
  if (st != L2FLOW_OK) {
    fprintf(stderr, "%s\n", l2flow_last_error());
    return 1;
  }
  printf("%s\n", l2flow_scenario_name(s));
  l2flow_scenario_free(s);
  return 0;
}
