import { ApiClient } from './api.js'
import { App } from './app.js'

const app = new App(new ApiClient(window.location.origin))
void app.start()
