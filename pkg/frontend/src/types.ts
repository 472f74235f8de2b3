// Payload shapes of the annotation service API.

export interface BatchPayload {
  batch_id: string;
  frame_ids: string[];
  image_urls: string[];
  classes: string[];
}

export interface Decision {
  start: number;
  end: number;
  label: string;
}

export interface Progress {
  labeled: number;
  total: number;
  mean_run_length: number;
}
